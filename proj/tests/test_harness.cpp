#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <numeric>
#include <fstream>
#include <set>
#include <sstream>

#include "near.hpp"
#include "normsim/clinic.hpp"
#include "normsim/config.hpp"
#include "normsim/error.hpp"
#include "normsim/experiments.hpp"

using namespace normsim;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string config_error(const json& j) {
  try {
    config::from_json(j);
  } catch (const config::ConfigError& e) {
    return e.what();
  }
  return "<accepted>";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Fresh scratch directory per test case, removed afterwards.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name)
      : dir(fs::temp_directory_path() / ("normsim_test_" + name)) {
    fs::remove_all(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  fs::path operator/(const std::string& s) const { return dir / s; }
};

config::ScenarioConfig tiny() {
  config::ScenarioConfig c;
  c.seed = 17;
  c.descriptive.community.agents = 6;
  c.descriptive.max_steps = 40;
  c.descriptive.runs = 3;
  c.descriptive.scan_from = 4;
  c.descriptive.scan_to = 6;
  c.descriptive.scan_step = 2;
  c.descriptive.scan_repeats = 2;
  c.prescriptive.steps = 4;
  c.replay_runs = 2;
  c.replay.steps_per_cycle = 5;
  return c;
}

std::size_t lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("default clinic dataset") {
  clinic::ClinicConfig c;
  auto rng = make_rng(1, {0xDA});
  const auto d = clinic::generate_clinic(c, rng);
  CHECK(d.doctors.size() == 10);
  CHECK(d.events.size() == 17);
  CHECK(clinic::format_date(d.events.front()) == "2016-12-23");
  CHECK(clinic::format_date(d.start) == "2016-01-01");
  CHECK(d.days() == 2 * 366 + 3 * 365);  // 2016 and 2020 are leap years
  CHECK(std::is_sorted(d.events.begin(), d.events.end()));
  int chiefs = 0;
  for (const auto& doc : d.doctors) {
    chiefs += doc.role == Role::Chief;
    for (const auto& p : doc.daily) CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
  }
  CHECK(chiefs == 2);
  CHECK(d.year_span(2017).second - d.year_span(2017).first + 1 == 365);
  CHECK(clinic::format_date(clinic::parse_date("2020-02-29")) == "2020-02-29");
  CHECK_THROWS_AS(clinic::parse_date("2019-02-29"), PreconditionError);
}

TEST_CASE("preference with a given diversity") {
  const std::array<int, kTestCount> order{3, 1, 0, 2, 6, 5, 4};
  for (double h : {0.05, 0.5, 1.2, 1.9}) {
    const auto p = clinic::preference_with_sdi(h, order);
    CHECK_NEAR(analysis::shannon_diversity(p), h, 1e-6);
    CHECK(p[3] >= p[1]);
    CHECK(p[1] >= p[0]);
  }
  CHECK_THROWS_AS(clinic::preference_with_sdi(0.0, order), PreconditionError);
  CHECK_THROWS_AS(clinic::preference_with_sdi(2.0, order), PreconditionError);
}

TEST_CASE("no drift keeps every doctor's diversity fixed") {
  clinic::ClinicConfig c;
  c.drift_rate = 0.0;
  auto rng = make_rng(2, {0xDA});
  const auto d = clinic::generate_clinic(c, rng);
  for (const auto& doc : d.doctors) {
    const auto s = doc.sdi();
    for (double v : s) CHECK_NEAR(v, s.front(), 1e-9);
  }
}

TEST_CASE("clinic data is reproducible and round-trips through CSV") {
  clinic::ClinicConfig c;
  auto r1 = make_rng(5, {0xDA});
  auto r2 = make_rng(5, {0xDA});
  std::ostringstream a, b;
  const auto d = clinic::generate_clinic(c, r1);
  clinic::write_dataset_csv(a, d);
  clinic::write_dataset_csv(b, clinic::generate_clinic(c, r2));
  CHECK(a.str() == b.str());

  std::istringstream in(a.str());
  const auto back = clinic::read_dataset_csv(in);
  std::ostringstream again;
  clinic::write_dataset_csv(again, back);
  CHECK(again.str() == a.str());

  std::istringstream broken("date,doctor_id,role,p0,p1,p2,p3,p4,p5,p6\n2016-01-01,d0,chief,1,0\n");
  CHECK_THROWS(clinic::read_dataset_csv(broken));
}

TEST_CASE("five practice styles show as the doctor elbow") {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rng = make_rng(seed, {0xDA});
    const auto d = clinic::generate_clinic({}, rng);
    hits += analysis::elbow_k(clinic::doctor_elbow(d, 9, 20, rng)) == 5;
  }
  CHECK(hits >= 18);
}

TEST_CASE("configuration round trip and hash") {
  const config::ScenarioConfig d;
  const json j = config::to_json(d);
  CHECK(config::to_json(config::from_json(j)) == j);
  CHECK(config::to_json(config::from_json(json::object())) == j);
  CHECK(config::config_hash(d) == config::config_hash(config::from_json(j)));
  CHECK(config::config_hash(d).size() == 16);
  auto e = d;
  e.seed = 2;
  CHECK(config::config_hash(e) != config::config_hash(d));
  json partial = {{"descriptive", {{"agents", 30}}}, {"seed", 9}};
  const auto p = config::from_json(partial);
  CHECK(p.descriptive.community.agents == 30);
  CHECK(p.seed == 9);
  CHECK(p.descriptive.max_steps == d.descriptive.max_steps);
}

TEST_CASE("configuration errors name the field") {
  CHECK(config_error({{"descriptive", {{"foo", 1}}}}) == "descriptive.foo: unknown field");
  CHECK(config_error({{"bogus", 1}}) == "bogus: unknown field");
  CHECK(config_error({{"descriptive", {{"agents", "many"}}}}) == "descriptive.agents: expected an integer");
  CHECK(config_error({{"descriptive", {{"agents", -3}}}}) == "descriptive.agents: must be >= 0");
  CHECK(config_error({{"prescriptive", {{"reward", {{"gamma", 1.5}}}}}}) ==
        "prescriptive: reward.gamma must be in (0, 1)");
  CHECK(config_error({{"schema_version", 2}}).rfind("schema_version: unsupported version 2", 0) == 0);
  CHECK(config_error({{"prescriptive", 3}}) == "prescriptive: expected an object");
  CHECK(config_error({{"analysis", {{"sliding_window", 0}}}}) == "analysis.sliding_window: must be >= 1");
  CHECK(config_error({{"replay", {{"runs", 0}}}}) == "replay: runs must be >= 1");
  CHECK_THROWS_AS(config::load("/nonexistent/normsim.json"), config::ConfigError);
}

TEST_CASE("experiment outputs are complete and reproducible") {
  Scratch s("runs");
  const auto cfg = tiny();
  using experiments::DescriptiveMode;
  struct Job {
    std::string name;
    std::function<json(const experiments::Options&)> run;
    std::set<std::string> files;
  };
  const std::vector<Job> jobs{
      {"single", [&](auto& o) { return experiments::run_descriptive(cfg, DescriptiveMode::Single, o); },
       {"kl_trace.csv", "convergence.csv"}},
      {"scan", [&](auto& o) { return experiments::run_descriptive(cfg, DescriptiveMode::Scan, o); },
       {"scan.csv"}},
      {"replay", [&](auto& o) { return experiments::run_descriptive(cfg, DescriptiveMode::Replay, o); },
       {"replay_runs.csv", "replay.csv", "replay_trajectory.csv", "yearly_increment.csv"}},
      {"prescriptive", [&](auto& o) { return experiments::run_prescriptive(cfg, o); },
       {"beliefs.csv", "trajectory.csv", "practice.csv", "average_beliefs.csv", "hypothesis.csv"}},
      {"gen", [&](auto& o) { return experiments::generate_data(cfg, o); },
       {"dataset.csv", "events.csv", "elbow.csv"}},
      {"analyze", [&](auto& o) { return experiments::analyze(cfg, "", o); },
       {"sdi_daily.csv", "yearly_increment.csv", "elbow.csv"}},
  };
  for (const auto& job : jobs) {
    INFO(job.name);
    const auto m1 = job.run({s / (job.name + "1"), 1, {}});
    const auto m2 = job.run({s / (job.name + "2"), 2, {}});
    std::set<std::string> names;
    for (const auto& [name, hash] : m1["outputs"].items()) {
      names.insert(name);
      CHECK(hash == experiments::fnv1a_hex(slurp(s / (job.name + "1") / name)));
    }
    CHECK(names == job.files);
    CHECK(m1["outputs"] == m2["outputs"]);  // worker count does not matter
    CHECK(m1["config_hash"] == config::config_hash(cfg));
    CHECK(m1["seed"] == 17);
    CHECK(json::parse(slurp(s / (job.name + "1") / "manifest.json")) == m1);
  }
}

TEST_CASE("zero-length runs write headers only") {
  Scratch s("empty");
  auto cfg = tiny();
  cfg.descriptive.max_steps = 0;
  cfg.prescriptive.steps = 0;
  experiments::run_descriptive(cfg, experiments::DescriptiveMode::Single, {s / "d", 1, {}});
  CHECK(slurp(s / "d" / "kl_trace.csv").rfind("step,agent_id,kl,converged\n", 0) == 0);
  CHECK(lines(slurp(s / "d" / "kl_trace.csv")) <= 1 + 6);  // at most the step-0 check

  const auto m = experiments::run_prescriptive(cfg, {s / "p", 1, {}});
  CHECK(lines(slurp(s / "p" / "trajectory.csv")) == 1);
  CHECK(lines(slurp(s / "p" / "practice.csv")) == 1);
  CHECK(m["summary"][0]["max_step_change"] == 0.0);

  const auto many = experiments::run_prescriptive(cfg, {s / "p3", 1, 3});
  CHECK(many["outputs"].contains("beliefs_run2.csv"));
  CHECK(many["summary"][2]["seed"] == 19);
}

TEST_CASE("convergence distribution and fitting a column") {
  Scratch s("fit");
  config::DescriptiveConfig dc;
  dc.max_steps = 5000;
  const auto d = experiments::convergence_distribution(dc, 3, 10, 2);
  CHECK(d.reports.size() == 10);
  CHECK(d.steps.size() == 10);
  for (double x : d.steps) CHECK(x >= 1.0);
  CHECK(d.fits.size() == 4);

  fs::create_directories(s.dir);
  {
    std::ofstream f(s / "x.csv");
    f << "run,value\n";
    for (int i = 1; i <= 40; ++i) f << i << ',' << std::exp(0.05 * i) << '\n';
  }
  const auto m = experiments::fit_distribution(s / "x.csv", "value", 8, {s / "out", 1, {}});
  CHECK(m["samples"] == 40);
  CHECK(lines(slurp(s / "out" / "histogram.csv")) == 9);
  CHECK_THROWS_AS(experiments::fit_distribution(s / "x.csv", "nope", 8, {s / "o2", 1, {}}),
                  PreconditionError);
  {
    std::ofstream f(s / "bad.csv");
    f << "value\n1\n2\nabc\n";
  }
  CHECK_THROWS_WITH(experiments::fit_distribution(s / "bad.csv", "", 8, {s / "o3", 1, {}}),
                    doctest::Contains("bad.csv:4: 'abc' is not a number"));
  CHECK_THROWS_AS(experiments::fit_distribution(s / "missing.csv", "", 8, {s / "o4", 1, {}}),
                  experiments::IoError);
  CHECK_FALSE(fs::exists(s / "o3"));
}

TEST_CASE("mode names") {
  using experiments::DescriptiveMode;
  for (auto m : {DescriptiveMode::Single, DescriptiveMode::Dist, DescriptiveMode::Scan,
                 DescriptiveMode::Replay})
    CHECK(experiments::mode_from_name(experiments::mode_name(m)) == m);
  CHECK_THROWS_AS(experiments::mode_from_name("all"), PreconditionError);
  CHECK(experiments::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(experiments::fnv1a_hex("a") == "af63dc4c8601ec8c");
}

}
