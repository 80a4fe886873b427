#pragma once

// Synthetic stand-in for the clinic's diagnostic records: per-doctor daily
// preference vectors over the 7 diagnostic methods whose diversity drifts
// toward a shared level after practice-sharing events, plus the two-year
// replay of that data through the descriptive model.

#include <array>
#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "normsim/actions.hpp"
#include "normsim/analysis.hpp"
#include "normsim/random.hpp"

namespace normsim::clinic {

using Date = std::chrono::year_month_day;
using Preference = std::array<double, kTestCount>;

Date parse_date(const std::string& iso);  // "YYYY-MM-DD"
std::string format_date(Date d);

struct ClinicConfig {
  int chiefs = 2;
  int assistants = 8;
  int first_year = 2016;
  int years = 5;
  std::size_t events = 17;
  std::string first_event = "2016-12-23";
  /// Diversity levels of the five practice styles doctors start in. Chiefs
  /// take the last level, assistants spread over the others.
  std::vector<double> style_levels = {0.80, 1.05, 1.30, 1.55, 1.85};
  double style_jitter = 0.015;
  double attractor = 1.40;
  /// Share of the remaining gap to the attractor closed at an event.
  double drift_rate = 0.08;
  /// Per-doctor response to an event is drift_rate * U(1 - spread, 1 + spread).
  double response_spread = 0.2;
  /// Days for a doctor's practice to settle after an event (1/e time).
  double settle_days = 30.0;

  void validate() const;
};

struct Doctor {
  std::string id;
  Role role = Role::Assistant;
  std::vector<Preference> daily;

  std::vector<double> sdi() const;
};

struct ClinicDataset {
  Date start;
  std::vector<Doctor> doctors;
  std::vector<Date> events;

  std::size_t days() const { return doctors.empty() ? 0 : doctors.front().daily.size(); }
  Date date_of(std::size_t day) const;
  /// Day indices [first, last] that fall in `year`.
  std::pair<std::size_t, std::size_t> year_span(int year) const;
  analysis::DailySeries sdi_series() const;
};

ClinicDataset generate_clinic(const ClinicConfig& cfg, Rng& rng);

/// Preference vector with the given diversity: weights exp(-beta * rank)
/// over methods listed most-preferred first.
Preference preference_with_sdi(double sdi, const std::array<int, kTestCount>& order);

/// One row per doctor-day: date,doctor_id,role,<7 method proportions>.
void write_dataset_csv(std::ostream& out, const ClinicDataset& d);
void write_events_csv(std::ostream& out, const ClinicDataset& d);
/// Inverse of write_dataset_csv. Rows may come in any order; every doctor must
/// cover the same contiguous date range.
ClinicDataset read_dataset_csv(std::istream& in);

/// Elbow curve over each doctor's mean diversity across the whole range.
std::vector<analysis::ElbowPoint> doctor_elbow(const ClinicDataset& d, std::size_t k_max,
                                               int restarts, Rng& rng);

struct ReplayConfig {
  std::size_t groups = 5;
  double sigma_indiv = 0.05;
  long steps_per_cycle = 200;
  double init_noise = 0.1;

  void validate() const;
};

struct ReplayResult {
  /// years[0] is the first year's own data; years[c + 1] ends cycle c.
  std::vector<int> years;
  std::vector<std::vector<double>> agent_sdi;  // [year index][doctor]: SINP mean
  std::vector<double> cross_std;               // per year index
  /// Per cycle and agent, SINP mean after every step.
  std::vector<std::vector<std::vector<double>>> trajectories;  // [cycle][agent][step]
};

/// For each consecutive year pair (y, y+1): every doctor's SINP starts from
/// its own year-y diversity, OBJ is the five-group fit of year y+1, and the
/// community shares samples of year-(y+1) tendencies for steps_per_cycle steps.
ReplayResult replay(const ClinicDataset& d, const ReplayConfig& cfg, Rng& rng);

void write_replay_csv(std::ostream& out, const ReplayResult& r);

}  // namespace normsim::clinic
