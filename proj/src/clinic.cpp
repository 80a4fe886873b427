#include "normsim/clinic.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "normsim/error.hpp"
#include "normsim/gmm.hpp"
#include "normsim/kmeans.hpp"
#include "normsim/network.hpp"

namespace normsim::clinic {

namespace chr = std::chrono;

Date parse_date(const std::string& iso) {
  int y = 0;
  unsigned m = 0, d = 0;
  char a = 0, b = 0;
  std::istringstream in(iso);
  if (!(in >> y >> a >> m >> b >> d) || a != '-' || b != '-')
    throw PreconditionError("bad date '" + iso + "' (expected YYYY-MM-DD)");
  Date out{chr::year{y}, chr::month{m}, chr::day{d}};
  if (!out.ok()) throw PreconditionError("bad date '" + iso + "'");
  return out;
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

void ClinicConfig::validate() const {
  require(chiefs >= 0 && assistants >= 0 && chiefs + assistants >= 2,
          "clinic: need at least 2 doctors");
  require(years >= 1, "clinic.years must be >= 1");
  require(events >= 1, "clinic.events must be >= 1");
  require(!style_levels.empty(), "clinic.style_levels must be nonempty");
  for (double s : style_levels)
    require(s > 0.0 && s < std::log(static_cast<double>(kTestCount)),
            "clinic.style_levels must lie in (0, ln 7)");
  require(attractor > 0.0 && attractor < std::log(static_cast<double>(kTestCount)),
          "clinic.attractor must lie in (0, ln 7)");
  require(style_jitter >= 0.0, "clinic.style_jitter must be >= 0");
  require(drift_rate >= 0.0 && drift_rate <= 1.0, "clinic.drift_rate must be in [0, 1]");
  require(response_spread >= 0.0 && response_spread <= 1.0,
          "clinic.response_spread must be in [0, 1]");
  require(settle_days > 0.0, "clinic.settle_days must be > 0");
  const auto first = parse_date(first_event);
  require(static_cast<int>(first.year()) >= first_year &&
              static_cast<int>(first.year()) < first_year + years,
          "clinic.first_event must fall inside the simulated years");
}

std::vector<double> Doctor::sdi() const {
  std::vector<double> out;
  out.reserve(daily.size());
  for (const auto& p : daily) out.push_back(analysis::shannon_diversity(p));
  return out;
}

Date ClinicDataset::date_of(std::size_t day) const {
  return Date{chr::sys_days{start} + chr::days{static_cast<long>(day)}};
}

std::pair<std::size_t, std::size_t> ClinicDataset::year_span(int year) const {
  const auto s = chr::sys_days{start};
  const long first = (chr::sys_days{Date{chr::year{year}, chr::January, chr::day{1}}} - s).count();
  const long last = (chr::sys_days{Date{chr::year{year}, chr::December, chr::day{31}}} - s).count();
  require(first >= 0 && last < static_cast<long>(days()),
          "year " + std::to_string(year) + " is not covered by the dataset");
  return {static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
}

analysis::DailySeries ClinicDataset::sdi_series() const {
  analysis::DailySeries s{start, {}};
  for (const auto& d : doctors) s.agents.push_back(d.sdi());
  return s;
}

namespace {

double sdi_of_beta(double beta) {
  double z = 0.0, h = 0.0;
  for (int r = 0; r < kTestCount; ++r) z += std::exp(-beta * r);
  for (int r = 0; r < kTestCount; ++r) {
    const double p = std::exp(-beta * r) / z;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

Preference preference_with_sdi(double sdi, const std::array<int, kTestCount>& order) {
  const double top = std::log(static_cast<double>(kTestCount));
  require(sdi > 0.0 && sdi <= top, "diversity must lie in (0, ln 7]");
  // Diversity falls monotonically in beta; bisect.
  double lo = 0.0, hi = 1.0;
  while (sdi_of_beta(hi) > sdi) hi *= 2.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (sdi_of_beta(mid) > sdi ? lo : hi) = mid;
  }
  const double beta = 0.5 * (lo + hi);
  Preference p{};
  double z = 0.0;
  for (int r = 0; r < kTestCount; ++r) z += std::exp(-beta * r);
  for (int r = 0; r < kTestCount; ++r) p[order[r]] = std::exp(-beta * r) / z;
  return p;
}

ClinicDataset generate_clinic(const ClinicConfig& cfg, Rng& rng) {
  cfg.validate();
  ClinicDataset out;
  out.start = Date{chr::year{cfg.first_year}, chr::January, chr::day{1}};
  const auto end = Date{chr::year{cfg.first_year + cfg.years - 1}, chr::December, chr::day{31}};
  const long days = (chr::sys_days{end} - chr::sys_days{out.start}).count() + 1;

  // Events: the pinned first one, the rest uniform over the days after it.
  const long first = (chr::sys_days{parse_date(cfg.first_event)} - chr::sys_days{out.start}).count();
  std::vector<long> event_days{first};
  if (cfg.events > 1) {
    std::uniform_int_distribution<long> pick(first + 1, days - 1);
    while (event_days.size() < cfg.events) {
      const long d = pick(rng);
      if (std::find(event_days.begin(), event_days.end(), d) == event_days.end())
        event_days.push_back(d);
    }
  }
  std::sort(event_days.begin(), event_days.end());
  for (long d : event_days) out.events.push_back(out.date_of(static_cast<std::size_t>(d)));

  const std::size_t n = static_cast<std::size_t>(cfg.chiefs + cfg.assistants);
  const std::size_t styles = cfg.style_levels.size();
  std::normal_distribution<double> jitter(0.0, cfg.style_jitter);
  std::uniform_real_distribution<double> response(1.0 - cfg.response_spread,
                                                  1.0 + cfg.response_spread);
  const double settle = 1.0 - std::exp(-1.0 / cfg.settle_days);
  const double top = std::log(static_cast<double>(kTestCount));

  for (std::size_t i = 0; i < n; ++i) {
    Doctor doc;
    const bool chief = i < static_cast<std::size_t>(cfg.chiefs);
    doc.role = chief ? Role::Chief : Role::Assistant;
    doc.id = std::string(chief ? "chief_" : "assistant_") +
             std::to_string(chief ? i : i - static_cast<std::size_t>(cfg.chiefs));
    std::size_t style;
    if (chief || styles == 1) {
      style = styles - 1;
    } else {
      style = (i - static_cast<std::size_t>(cfg.chiefs)) % (styles - 1);
    }

    std::array<int, kTestCount> order;
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    double level = std::clamp(cfg.style_levels[style] + jitter(rng), 1e-3, top - 1e-3);
    double target = level;
    std::size_t next_event = 0;
    doc.daily.reserve(static_cast<std::size_t>(days));
    for (long d = 0; d < days; ++d) {
      while (next_event < event_days.size() && event_days[next_event] == d) {
        const double r = std::min(1.0, cfg.drift_rate * response(rng));
        target += r * (cfg.attractor - target);
        ++next_event;
      }
      level += settle * (target - level);
      doc.daily.push_back(preference_with_sdi(level, order));
    }
    out.doctors.push_back(std::move(doc));
  }
  return out;
}

void write_dataset_csv(std::ostream& out, const ClinicDataset& d) {
  out << "date,doctor_id,role";
  for (int t = 0; t < kTestCount; ++t) out << ',' << test_name(static_cast<Test>(t));
  out << '\n';
  out.precision(12);
  for (std::size_t day = 0; day < d.days(); ++day) {
    const auto date = format_date(d.date_of(day));
    for (const auto& doc : d.doctors) {
      out << date << ',' << doc.id << ',' << role_name(doc.role);
      for (double p : doc.daily[day]) out << ',' << p;
      out << '\n';
    }
  }
}

void write_events_csv(std::ostream& out, const ClinicDataset& d) {
  out << "date\n";
  for (const auto& e : d.events) out << format_date(e) << '\n';
}

ClinicDataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw PreconditionError("dataset CSV is empty");
  struct Row {
    chr::sys_days date;
    Role role;
    Preference p;
  };
  std::map<std::string, std::vector<Row>> rows;
  std::vector<std::string> order;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 3 + kTestCount)
      throw PreconditionError("dataset CSV line " + std::to_string(line_no) + ": expected " +
                              std::to_string(3 + kTestCount) + " fields");
    auto role = role_from_name(f[2]);
    if (!role) throw PreconditionError("dataset CSV line " + std::to_string(line_no) +
                                       ": unknown role '" + f[2] + "'");
    Row r{chr::sys_days{parse_date(f[0])}, *role, {}};
    for (int t = 0; t < kTestCount; ++t) r.p[t] = std::stod(f[3 + t]);
    if (!rows.count(f[1])) order.push_back(f[1]);
    rows[f[1]].push_back(r);
  }
  require(!rows.empty(), "dataset CSV has no rows");

  ClinicDataset d;
  std::optional<chr::sys_days> first, last;
  for (const auto& id : order) {
    auto& rs = rows[id];
    std::sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < rs.size(); ++i)
      require(rs[i].date - rs[i - 1].date == chr::days{1},
              "doctor '" + id + "' does not have one row per consecutive day");
    if (!first) {
      first = rs.front().date;
      last = rs.back().date;
    }
    require(rs.front().date == *first && rs.back().date == *last,
            "doctor '" + id + "' covers a different date range");
    Doctor doc{id, rs.front().role, {}};
    for (const auto& r : rs) doc.daily.push_back(r.p);
    d.doctors.push_back(std::move(doc));
  }
  d.start = Date{*first};
  return d;
}

std::vector<analysis::ElbowPoint> doctor_elbow(const ClinicDataset& d, std::size_t k_max,
                                               int restarts, Rng& rng) {
  std::vector<double> means;
  for (const auto& doc : d.doctors) {
    const auto s = doc.sdi();
    means.push_back(std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size()));
  }
  k_max = std::min(k_max, means.size());
  return analysis::kmeans_elbow(means, {1, k_max}, restarts, rng);
}

void ReplayConfig::validate() const {
  require(groups >= 1, "replay.groups must be >= 1");
  require(sigma_indiv > 0.0, "replay.sigma_indiv must be > 0");
  require(steps_per_cycle >= 1, "replay.steps_per_cycle must be >= 1");
  require(init_noise >= 0.0, "replay.init_noise must be >= 0");
}

namespace {

std::vector<double> slice(const std::vector<double>& v, std::pair<std::size_t, std::size_t> s) {
  return {v.begin() + static_cast<long>(s.first), v.begin() + static_cast<long>(s.second) + 1};
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

// Five-group objective of one year: clusters of the doctors' yearly means.
gmm::MixtureModel year_objective(const std::vector<double>& doctor_means, std::size_t k,
                                 double std_floor, Rng& rng) {
  auto km = analysis::kmeans_1d(doctor_means, k, 10, rng);
  std::vector<double> w(k, 0.0);
  for (auto l : km.labels) w[l] += 1.0 / static_cast<double>(doctor_means.size());
  const double sd =
      std::max(std_floor, std::sqrt(km.wcss / static_cast<double>(doctor_means.size())));
  return gmm::MixtureModel::with_shared_std(w, km.centroids, sd);
}

}  // namespace

ReplayResult replay(const ClinicDataset& d, const ReplayConfig& cfg, Rng& rng) {
  cfg.validate();
  require(d.doctors.size() >= 2, "replay needs at least 2 doctors");
  const std::size_t n = d.doctors.size();
  const std::size_t k = std::min(cfg.groups, n);

  std::vector<int> years;
  const int last_year = static_cast<int>(d.date_of(d.days() - 1).year());
  for (int y = static_cast<int>(d.start.year()); y <= last_year; ++y) {
    try {
      d.year_span(y);
      years.push_back(y);
    } catch (const PreconditionError&) {
    }
  }
  require(years.size() >= 2, "replay needs at least two complete years");

  std::vector<std::vector<double>> sdi;
  for (const auto& doc : d.doctors) sdi.push_back(doc.sdi());

  ReplayResult out;
  out.years = years;
  std::normal_distribution<double> blur(0.0, cfg.sigma_indiv);
  for (std::size_t c = 0; c + 1 < years.size(); ++c) {
    const auto now = d.year_span(years[c]);
    const auto next = d.year_span(years[c + 1]);
    std::vector<double> next_means;
    for (const auto& s : sdi) next_means.push_back(mean_of(slice(s, next)));

    network::CommunityConfig cc;
    cc.agents = n;
    cc.sigma_indiv = cfg.sigma_indiv;
    cc.obj = year_objective(next_means, k, cfg.sigma_indiv, rng);
    cc.init_noise = cfg.init_noise;

    std::vector<network::Agent> agents;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> prior = slice(sdi[i], now);
      for (auto& x : prior) x += blur(rng);
      auto sinp = gmm::vq_initial_model(prior, k, rng);
      gmm::ObservationBuffer buffer(cc.buffer);
      for (double x : prior) buffer.push(x);
      agents.push_back({i, 0, {next_means[i], cfg.sigma_indiv}, std::move(sinp),
                        std::move(buffer), std::nullopt});
    }
    network::Community community(cc, std::move(agents));

    if (c == 0) {
      std::vector<double> first;
      for (const auto& a : community.agents()) first.push_back(a.sinp.mean());
      out.agent_sdi.push_back(first);
    }
    std::vector<std::vector<double>> traj(n);
    for (long s = 0; s < cfg.steps_per_cycle; ++s) {
      network::step(community, rng);
      for (std::size_t i = 0; i < n; ++i) traj[i].push_back(community.agents()[i].sinp.mean());
    }
    std::vector<double> end;
    for (const auto& a : community.agents()) end.push_back(a.sinp.mean());
    out.agent_sdi.push_back(end);
    out.trajectories.push_back(std::move(traj));
  }
  for (const auto& v : out.agent_sdi) out.cross_std.push_back(std_of(v));
  return out;
}

void write_replay_csv(std::ostream& out, const ReplayResult& r) {
  out << "year,agent_id,sinp_mean\n";
  out.precision(12);
  for (std::size_t y = 0; y < r.agent_sdi.size(); ++y)
    for (std::size_t i = 0; i < r.agent_sdi[y].size(); ++i)
      out << r.years[y] << ',' << i << ',' << r.agent_sdi[y][i] << '\n';
}

}  // namespace normsim::clinic
