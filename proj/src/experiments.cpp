#include "normsim/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "normsim/error.hpp"
#include "normsim/parallel.hpp"
#include "normsim/prescriptive.hpp"

namespace normsim::experiments {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view mode_name(DescriptiveMode m) {
  switch (m) {
    case DescriptiveMode::Single: return "single";
    case DescriptiveMode::Dist: return "dist";
    case DescriptiveMode::Scan: return "scan";
    case DescriptiveMode::Replay: return "replay";
  }
  return "?";
}

DescriptiveMode mode_from_name(std::string_view name) {
  for (auto m : {DescriptiveMode::Single, DescriptiveMode::Dist, DescriptiveMode::Scan,
                 DescriptiveMode::Replay})
    if (mode_name(m) == name) return m;
  throw PreconditionError("unknown descriptive mode '" + std::string(name) +
                          "' (expected single, dist, scan or replay)");
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

constexpr std::uint64_t kDistStream = 0xD1;
constexpr std::uint64_t kReplayStream = 0xE0;
constexpr std::uint64_t kDataStream = 0xDA;

// Collects outputs in memory, then writes them and the manifest in one go so
// that a failed run leaves no half-written directory behind.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

  std::ostringstream& file(const std::string& name) {
    auto& s = files_[name];
    s.precision(10);
    return s;
  }

  json commit(json manifest) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError(dir_.string() + ": cannot create directory: " + ec.message());
    json hashes = json::object();
    for (const auto& [name, s] : files_) {
      const std::string bytes = s.str();
      write(dir_ / name, bytes);
      hashes[name] = fnv1a_hex(bytes);
    }
    manifest["outputs"] = hashes;
    write(dir_ / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
  }

 private:
  static void write(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError(p.string() + ": cannot open for writing");
    out << bytes;
    if (!out) throw IoError(p.string() + ": write failed");
  }

  fs::path dir_;
  std::map<std::string, std::ostringstream> files_;
};

json base_manifest(const config::ScenarioConfig& cfg, const std::string& command) {
  return {{"tool", "normsim"},
          {"version", config::kVersion},
          {"schema_version", config::kSchemaVersion},
          {"command", command},
          {"seed", cfg.seed},
          {"config_hash", config::config_hash(cfg)},
          {"config", config::to_json(cfg)}};
}

json fits_json(const std::vector<analysis::FitResult>& fits) {
  json out = json::object();
  for (const auto& f : fits)
    out[analysis::to_string(f.family)] = {{"params", f.params},
                                          {"loglik", f.loglik},
                                          {"ks_statistic", f.ks_statistic},
                                          {"converged", f.converged}};
  return out;
}

const analysis::FitResult* best_heavy_tail(const std::vector<analysis::FitResult>& fits) {
  const analysis::FitResult* best = nullptr;
  for (const auto& f : fits)
    if (f.family != analysis::Family::Normal && (!best || f.ks_statistic < best->ks_statistic))
      best = &f;
  return best;
}

std::vector<analysis::FitResult> fit_all(const std::vector<double>& samples) {
  std::vector<analysis::FitResult> fits;
  if (samples.size() < 10) return fits;
  for (auto f : {analysis::Family::Lognormal, analysis::Family::Pareto, analysis::Family::Burr,
                 analysis::Family::Normal})
    fits.push_back(analysis::fit_heavy_tail(samples, f));
  return fits;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

json descriptive_single(const config::ScenarioConfig& cfg, OutputSet& out) {
  auto rng = make_rng(cfg.seed);
  auto community = network::make_community(cfg.descriptive.community, rng);
  auto& trace = out.file("kl_trace.csv");
  trace << "step,agent_id,kl,converged\n";
  const auto report = network::run_until_converged(
      community, cfg.descriptive.max_steps, rng, cfg.seed, [&](const network::Community& c) {
        const auto kl = network::kl_to_objective(c);
        for (std::size_t i = 0; i < kl.size(); ++i)
          trace << c.time() << ',' << i << ',' << kl[i] << ','
                << (c.agents()[i].converged_at ? 1 : 0) << '\n';
      });
  report.write_csv(out.file("convergence.csv"));
  json s = {{"fraction", report.fraction}, {"steps_run", report.steps_run}};
  s["all_converged_step"] =
      report.all_converged_step ? json(*report.all_converged_step) : json(nullptr);
  return s;
}

json descriptive_dist(const config::ScenarioConfig& cfg, std::size_t runs, unsigned jobs,
                      OutputSet& out) {
  const auto r = convergence_distribution(cfg.descriptive, cfg.seed, runs, jobs);
  auto& f = out.file("convergence_runs.csv");
  f << "run,seed,fraction,steps_run,all_converged_step\n";
  auto& a = out.file("convergence_agents.csv");
  a << "run,agent_id,converged_step\n";
  std::vector<double> fractions;
  for (std::size_t i = 0; i < r.reports.size(); ++i) {
    const auto& rep = r.reports[i];
    f << i << ',' << rep.seed << ',' << rep.fraction << ',' << rep.steps_run << ',';
    if (rep.all_converged_step) f << *rep.all_converged_step;
    f << '\n';
    for (std::size_t k = 0; k < rep.converged_step.size(); ++k) {
      a << i << ',' << k << ',';
      if (rep.converged_step[k]) a << *rep.converged_step[k];
      a << '\n';
    }
    fractions.push_back(rep.fraction);
  }
  analysis::write_fit_csv(out.file("fits.csv"), r.fits);
  auto& h = out.file("histogram.csv");
  const auto* best = best_heavy_tail(r.fits);
  if (best) {
    analysis::write_histogram_csv(h, analysis::histogram_with_fit(r.steps, 20, *best));
  } else {
    analysis::write_histogram_csv(h, {});
  }

  std::vector<double> sorted = r.steps;
  std::sort(sorted.begin(), sorted.end());
  json s = {{"runs", runs},
            {"all_converged_runs", r.steps.size()},
            {"mean_fraction", mean_of(fractions)},
            {"fits", fits_json(r.fits)}};
  s["median_step"] = sorted.empty() ? json(nullptr) : json(sorted[sorted.size() / 2]);
  s["best_heavy_tail"] = best ? json(analysis::to_string(best->family)) : json(nullptr);
  return s;
}

json descriptive_scan(const config::ScenarioConfig& cfg, std::optional<std::size_t> runs,
                      unsigned jobs, OutputSet& out) {
  const auto& d = cfg.descriptive;
  const auto scan =
      network::convergence_ratio_scan(d.scan_from, d.scan_to, d.scan_step, runs.value_or(d.scan_repeats),
                                      d.community, d.max_steps, cfg.seed, jobs);
  network::write_scan_csv(out.file("scan.csv"), scan);
  std::vector<double> x, y;
  for (const auto& p : scan) {
    x.push_back(static_cast<double>(p.agents));
    y.push_back(p.mean_fraction);
  }
  json s = {{"points", scan.size()}};
  s["slope"] = scan.size() >= 2 ? json(analysis::ols_slope(x, y)) : json(nullptr);
  if (!scan.empty()) s["drop"] = y.front() - y.back();
  return s;
}

json descriptive_replay(const config::ScenarioConfig& cfg, std::size_t runs, unsigned jobs,
                        OutputSet& out) {
  const auto r = replay_runs(cfg.clinic, cfg.replay, cfg.seed, runs, jobs);
  auto& f = out.file("replay_runs.csv");
  f << "run,year,cross_std\n";
  for (std::size_t i = 0; i < r.cross_std.size(); ++i)
    for (std::size_t y = 0; y < r.cross_std[i].size(); ++y)
      f << i << ',' << r.years[y] << ',' << r.cross_std[i][y] << '\n';

  // The first run in full: per-year SINP means and smoothed step trajectories.
  if (runs > 0) {
    auto rng = make_rng(cfg.seed, {kReplayStream, 0});
    const auto data = clinic::generate_clinic(cfg.clinic, rng);
    const auto one = clinic::replay(data, cfg.replay, rng);
    clinic::write_replay_csv(out.file("replay.csv"), one);
    auto& t = out.file("replay_trajectory.csv");
    t << "year,step,agent_id,sinp_mean,smoothed\n";
    for (std::size_t c = 0; c < one.trajectories.size(); ++c)
      for (std::size_t a = 0; a < one.trajectories[c].size(); ++a) {
        const auto& series = one.trajectories[c][a];
        const auto smooth = analysis::sliding_window_mean(series, cfg.sliding_window);
        for (std::size_t k = 0; k < series.size(); ++k)
          t << one.years[c + 1] << ',' << k << ',' << a << ',' << series[k] << ',' << smooth[k]
            << '\n';
      }
    const auto inc = analysis::yearly_increment(data.sdi_series());
    auto& yi = out.file("yearly_increment.csv");
    yi << "year,increment\n";
    for (const auto& [y, v] : inc) yi << y << ',' << v << '\n';
  } else {
    out.file("replay.csv") << "year,agent_id,sinp_mean\n";
    out.file("replay_trajectory.csv") << "year,step,agent_id,sinp_mean,smoothed\n";
    out.file("yearly_increment.csv") << "year,increment\n";
  }
  return {{"runs", runs}, {"declined", r.declined}, {"years", r.years}};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError(p.string() + ": cannot open for reading");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

DistResult convergence_distribution(const config::DescriptiveConfig& cfg, std::uint64_t seed,
                                    std::size_t runs, unsigned jobs) {
  DistResult r;
  r.reports.resize(runs);
  parallel_for(runs, jobs, [&](std::size_t i) {
    const auto run_seed = derive_seed(seed, {kDistStream, i});
    Rng rng(run_seed);
    auto c = network::make_community(cfg.community, rng);
    r.reports[i] = network::run_until_converged(c, cfg.max_steps, rng, run_seed);
  });
  for (const auto& rep : r.reports)
    if (rep.all_converged_step)
      // A community that starts converged counts as one step so the sample stays positive.
      r.steps.push_back(static_cast<double>(std::max<long>(1, *rep.all_converged_step)));
  r.fits = fit_all(r.steps);
  return r;
}

ReplayRuns replay_runs(const clinic::ClinicConfig& clinic, const clinic::ReplayConfig& replay,
                       std::uint64_t seed, std::size_t runs, unsigned jobs) {
  ReplayRuns out;
  out.cross_std.resize(runs);
  std::vector<std::vector<int>> years(runs);
  parallel_for(runs, jobs, [&](std::size_t i) {
    auto rng = make_rng(seed, {kReplayStream, i});
    const auto data = clinic::generate_clinic(clinic, rng);
    const auto r = clinic::replay(data, replay, rng);
    out.cross_std[i] = r.cross_std;
    years[i] = r.years;
  });
  if (runs > 0) out.years = years.front();
  for (const auto& s : out.cross_std)
    if (!s.empty() && s.back() < s.front()) ++out.declined;
  return out;
}

json run_descriptive(const config::ScenarioConfig& cfg, DescriptiveMode mode, const Options& opt) {
  OutputSet out(opt.out);
  json m = base_manifest(cfg, "descriptive");
  m["mode"] = mode_name(mode);
  switch (mode) {
    case DescriptiveMode::Single:
      m["summary"] = descriptive_single(cfg, out);
      break;
    case DescriptiveMode::Dist: {
      const auto runs = opt.runs.value_or(cfg.descriptive.runs);
      m["runs"] = runs;
      m["summary"] = descriptive_dist(cfg, runs, opt.jobs, out);
      break;
    }
    case DescriptiveMode::Scan:
      m["runs"] = opt.runs.value_or(cfg.descriptive.scan_repeats);
      m["summary"] = descriptive_scan(cfg, opt.runs, opt.jobs, out);
      break;
    case DescriptiveMode::Replay: {
      const auto runs = opt.runs.value_or(cfg.replay_runs);
      m["runs"] = runs;
      m["summary"] = descriptive_replay(cfg, runs, opt.jobs, out);
      break;
    }
  }
  return out.commit(std::move(m));
}

json run_prescriptive(const config::ScenarioConfig& cfg, const Options& opt) {
  const std::size_t runs = opt.runs.value_or(1);
  json m = base_manifest(cfg, "prescriptive");
  m["runs"] = runs;
  OutputSet out(opt.out);
  std::vector<prescriptive::Result> results(runs);
  std::vector<std::ostringstream> beliefs(runs), traj(runs), practice(runs);
  parallel_for(runs, opt.jobs, [&](std::size_t i) {
    for (auto* s : {&beliefs[i], &traj[i], &practice[i]}) s->precision(10);
    prescriptive::Sinks sinks{&beliefs[i], &traj[i], &practice[i]};
    results[i] = prescriptive::run(cfg.prescriptive, cfg.seed + i, sinks);
  });

  json summary = json::array();
  for (std::size_t i = 0; i < runs; ++i) {
    const std::string suffix = runs == 1 ? "" : "_run" + std::to_string(i);
    out.file("beliefs" + suffix + ".csv") << beliefs[i].str();
    out.file("trajectory" + suffix + ".csv") << traj[i].str();
    out.file("practice" + suffix + ".csv") << practice[i].str();
    prescriptive::write_average_table(out.file("average_beliefs" + suffix + ".csv"), results[i]);
    auto& hyp = out.file("hypothesis" + suffix + ".csv");
    hyp << "norm_id,is_core\n";
    for (const auto& n : results[i].hypothesis.norms()) hyp << n.id << ',' << n.is_core << '\n';

    json avg = json::array();
    for (const auto& [id, v] : results[i].average) avg.push_back({{"norm_id", id}, {"belief", v}});
    summary.push_back({{"seed", cfg.seed + i},
                       {"average", avg},
                       {"max_step_change", results[i].max_step_change},
                       {"fallbacks", results[i].fallbacks}});
  }
  m["summary"] = summary;
  return out.commit(std::move(m));
}

json generate_data(const config::ScenarioConfig& cfg, const Options& opt) {
  OutputSet out(opt.out);
  auto rng = make_rng(cfg.seed, {kDataStream});
  const auto data = clinic::generate_clinic(cfg.clinic, rng);
  clinic::write_dataset_csv(out.file("dataset.csv"), data);
  clinic::write_events_csv(out.file("events.csv"), data);
  const std::size_t k_max = std::min<std::size_t>(9, data.doctors.size());
  const auto curve = clinic::doctor_elbow(data, k_max, 20, rng);
  analysis::write_elbow_csv(out.file("elbow.csv"), curve);
  json m = base_manifest(cfg, "gen-data");
  m["summary"] = {{"doctors", data.doctors.size()},
                  {"days", data.days()},
                  {"events", data.events.size()},
                  {"elbow_k", analysis::elbow_k(curve)}};
  return out.commit(std::move(m));
}

json fit_distribution(const fs::path& input, const std::string& column, std::size_t bins,
                      const Options& opt) {
  require(bins >= 1, "bins must be >= 1");
  std::istringstream in(read_file(input));
  std::string line;
  if (!std::getline(in, line)) throw IoError(input.string() + ": empty file");
  const auto header = split_csv_line(line);
  std::size_t col = 0;
  if (!column.empty()) {
    auto it = std::find(header.begin(), header.end(), column);
    if (it == header.end())
      throw PreconditionError(input.string() + ": no column '" + column + "'");
    col = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<double> samples;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    const auto cells = split_csv_line(line);
    if (col >= cells.size() || cells[col].empty()) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(cells[col], &used);
      if (used != cells[col].size()) throw std::invalid_argument("trailing text");
      samples.push_back(v);
    } catch (const std::exception&) {
      throw PreconditionError(input.string() + ":" + std::to_string(row) + ": '" + cells[col] +
                              "' is not a number");
    }
  }
  require(samples.size() >= 10, input.string() + ": need at least 10 samples, found " +
                                    std::to_string(samples.size()));
  require(std::all_of(samples.begin(), samples.end(), [](double x) { return x > 0.0; }),
          input.string() + ": samples must be positive");

  OutputSet out(opt.out);
  const auto fits = fit_all(samples);
  analysis::write_fit_csv(out.file("fits.csv"), fits);
  const auto* best = best_heavy_tail(fits);
  analysis::write_histogram_csv(out.file("histogram.csv"),
                                analysis::histogram_with_fit(samples, bins, *best));
  json m = {{"tool", "normsim"},
            {"version", config::kVersion},
            {"command", "fit-dist"},
            {"input", input.string()},
            {"input_hash", fnv1a_hex(read_file(input))},
            {"column", header[col]},
            {"samples", samples.size()},
            {"summary", {{"fits", fits_json(fits)}, {"best_heavy_tail", analysis::to_string(best->family)}}}};
  return out.commit(std::move(m));
}

json analyze(const config::ScenarioConfig& cfg, const fs::path& input, const Options& opt) {
  clinic::ClinicDataset data;
  auto rng = make_rng(cfg.seed, {kDataStream});
  json m = base_manifest(cfg, "analyze");
  if (input.empty()) {
    data = clinic::generate_clinic(cfg.clinic, rng);
  } else {
    const std::string bytes = read_file(input);
    std::istringstream in(bytes);
    data = clinic::read_dataset_csv(in);
    m["input"] = input.string();
    m["input_hash"] = fnv1a_hex(bytes);
  }

  OutputSet out(opt.out);
  auto& daily = out.file("sdi_daily.csv");
  daily << "date,doctor_id,sdi,sdi_smoothed\n";
  const auto series = data.sdi_series();
  for (std::size_t i = 0; i < data.doctors.size(); ++i) {
    const auto smooth = analysis::sliding_window_mean(series.agents[i], cfg.sliding_window);
    for (std::size_t t = 0; t < series.agents[i].size(); ++t)
      daily << clinic::format_date(data.date_of(t)) << ',' << data.doctors[i].id << ','
            << series.agents[i][t] << ',' << smooth[t] << '\n';
  }
  auto& yi = out.file("yearly_increment.csv");
  yi << "year,increment\n";
  for (const auto& [y, v] : analysis::yearly_increment(series)) yi << y << ',' << v << '\n';

  json k = nullptr;
  if (!data.doctors.empty()) {
    const std::size_t k_max = std::min<std::size_t>(9, data.doctors.size());
    const auto curve = clinic::doctor_elbow(data, k_max, 20, rng);
    analysis::write_elbow_csv(out.file("elbow.csv"), curve);
    k = analysis::elbow_k(curve);
  }
  m["summary"] = {{"doctors", data.doctors.size()}, {"days", data.days()}, {"elbow_k", k}};
  return out.commit(std::move(m));
}

}  // namespace normsim::experiments
