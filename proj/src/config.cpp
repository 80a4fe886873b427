#include "normsim/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "normsim/error.hpp"

namespace normsim::config {

using nlohmann::json;

namespace {

// Reads one JSON object, tracking which keys were used so that leftovers can
// be reported as unknown fields.
class Reader {
 public:
  Reader(const json* j, std::string path) : j_(j), path_(std::move(path)) {
    if (j_ && !j_->is_object()) fail("", "expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      read(*v, out, key);
    } catch (const json::exception& e) {
      fail(key, e.what());
    }
  }

  Reader child(const char* key) { return Reader(find(key), at(key)); }

  void finish() const {
    if (!j_) return;
    for (const auto& [k, _] : j_->items())
      if (!used_.count(k)) fail(k, "unknown field");
  }

  std::string at(const std::string& key) const {
    if (key.empty()) return path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError((key.empty() ? path_ : at(key)) + ": " + what);
  }

 private:
  const json* find(const char* key) {
    if (!j_) return nullptr;
    auto it = j_->find(key);
    if (it == j_->end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  void read(const json& v, double& out, const char* key) {
    if (!v.is_number()) fail(key, "expected a number");
    out = v.get<double>();
  }
  void read(const json& v, bool& out, const char* key) {
    if (!v.is_boolean()) fail(key, "expected true or false");
    out = v.get<bool>();
  }
  void read(const json& v, std::string& out, const char* key) {
    if (!v.is_string()) fail(key, "expected a string");
    out = v.get<std::string>();
  }
  void read(const json& v, std::vector<double>& out, const char* key) {
    if (!v.is_array()) fail(key, "expected an array of numbers");
    out.clear();
    for (const auto& x : v) {
      if (!x.is_number()) fail(key, "expected an array of numbers");
      out.push_back(x.get<double>());
    }
  }
  template <class I>
    requires std::is_integral_v<I>
  void read(const json& v, I& out, const char* key) {
    if (!v.is_number_integer()) fail(key, "expected an integer");
    if constexpr (std::is_unsigned_v<I>) {
      if (v.is_number_unsigned()) {
        out = v.get<I>();
      } else {
        if (v.get<long long>() < 0) fail(key, "must be >= 0");
        out = static_cast<I>(v.get<long long>());
      }
    } else {
      out = v.get<I>();
    }
  }

  const json* j_;
  std::string path_;
  std::set<std::string> used_;
};

// Validation messages that already name their field keep it; others get the
// section path in front.
ConfigError section_error(const std::string& section, const std::string& what) {
  if (what.rfind(section + ".", 0) == 0) return ConfigError(what);
  return ConfigError(section + ": " + what);
}

template <class Fn>
void checked(const std::string& section, Fn&& fn) {
  try {
    fn();
  } catch (const PreconditionError& e) {
    throw section_error(section, e.what());
  } catch (const DimensionMismatch& e) {
    throw section_error(section, e.what());
  }
}

gmm::BufferPolicy read_buffer(Reader r) {
  std::string kind = "binned";
  double width = 1e-3;
  std::size_t capacity = 0;
  r.get("kind", kind);
  r.get("bin_width", width);
  r.get("capacity", capacity);
  r.finish();
  if (kind == "unbounded") return gmm::BufferPolicy::unbounded();
  if (kind == "ring") {
    if (capacity < 1) r.fail("capacity", "must be >= 1 for a ring buffer");
    return gmm::BufferPolicy::ring(capacity);
  }
  if (kind == "binned") {
    if (!(width > 0.0)) r.fail("bin_width", "must be > 0");
    return gmm::BufferPolicy::binned(width);
  }
  r.fail("kind", "expected unbounded, ring or binned");
}

json buffer_json(const gmm::BufferPolicy& b) {
  switch (b.kind) {
    case gmm::BufferPolicy::Kind::Unbounded: return {{"kind", "unbounded"}};
    case gmm::BufferPolicy::Kind::Ring: return {{"kind", "ring"}, {"capacity", b.ring_capacity}};
    case gmm::BufferPolicy::Kind::Binned: return {{"kind", "binned"}, {"bin_width", b.bin_width}};
  }
  return {};
}

void read_descriptive(Reader r, DescriptiveConfig& d) {
  auto& c = d.community;
  r.get("agents", c.agents);
  {
    auto o = r.child("objective");
    auto w = c.obj.weights();
    auto m = c.obj.means();
    double sd = c.obj.components().front().std;
    o.get("weights", w);
    o.get("means", m);
    o.get("std", sd);
    o.finish();
    checked(r.at("objective"), [&] {
      require(w.size() == m.size(), "weights and means must have the same length");
      require(sd > 0.0, "std must be > 0");
      c.obj = gmm::MixtureModel::with_shared_std(w, m, sd);
    });
  }
  r.get("sigma_indiv", c.sigma_indiv);
  r.get("epsilon", c.epsilon);
  r.get("prior_samples", c.prior_samples);
  r.get("prior_equal_weights", c.prior_equal_weights);
  r.get("prior_in_buffer", c.prior_in_buffer);
  r.get("init_noise", c.init_noise);
  r.get("em_iterations", c.em_iterations);
  r.get("em_tol", c.em_tol);
  r.get("sinp_variance_floor", c.sinp_variance_floor);
  r.get("stratified_groups", c.stratified_groups);
  r.get("refit_converged", c.refit_converged);
  c.buffer = read_buffer(r.child("buffer"));
  r.get("max_steps", d.max_steps);
  r.get("runs", d.runs);
  {
    auto s = r.child("scan");
    s.get("from", d.scan_from);
    s.get("to", d.scan_to);
    s.get("step", d.scan_step);
    s.get("repeats", d.scan_repeats);
    s.finish();
  }
  r.finish();
  checked(r.at(""), [&] {
    c.validate();
    require(c.sinp_variance_floor >= 0.0, "sinp_variance_floor must be >= 0");
    require(d.max_steps >= 0, "max_steps must be >= 0");
    require(d.runs >= 1, "runs must be >= 1");
    require(d.scan_from >= 2 && d.scan_from <= d.scan_to, "scan.from must be in [2, scan.to]");
    require(d.scan_step >= 1, "scan.step must be >= 1");
    require(d.scan_repeats >= 1, "scan.repeats must be >= 1");
  });
}

void read_prescriptive(Reader r, prescriptive::Config& p) {
  r.get("chiefs", p.chiefs);
  r.get("assistants", p.assistants);
  r.get("steps", p.steps);
  r.get("n_controls", p.n_controls);
  r.get("initial_belief", p.initial_belief);
  std::string s;
  checked(r.at("adherence"), [&] {
    s = std::string(prescriptive::adherence_name(p.adherence));
    r.get("adherence", s);
    p.adherence = prescriptive::adherence_from_name(s);
  });
  checked(r.at("target"), [&] {
    s = std::string(prescriptive::target_mode_name(p.target));
    r.get("target", s);
    p.target = prescriptive::target_mode_from_name(s);
  });
  checked(r.at("normalization"), [&] {
    s = std::string(belief::normalization_name(p.normalization));
    r.get("normalization", s);
    p.normalization = belief::normalization_from_name(s);
  });
  r.get("practice_duration", p.practice_duration);
  r.get("practice_rollouts", p.practice_rollouts);
  r.get("max_tests", p.max_tests);
  r.get("plan_with_enforced", p.plan_with_enforced);
  {
    auto q = r.child("reward");
    q.get("diagnostic_cost", p.reward.diagnostic_cost);
    q.get("bonus_prob", p.reward.bonus_prob);
    q.get("bonus_value", p.reward.bonus_value);
    q.get("bonus_min_tests", p.reward.bonus_min_tests);
    q.get("gamma", p.reward.gamma);
    q.get("temperature", p.reward.temperature);
    q.finish();
  }
  {
    auto q = r.child("schedule");
    q.get("plan_depth", p.schedule.plan_depth);
    q.get("replan_every", p.schedule.replan_every);
    q.get("resample_every", p.schedule.resample_every);
    q.get("practice_every", p.schedule.practice_every);
    q.finish();
  }
  {
    auto q = r.child("update");
    q.get("beta1", p.update.beta1);
    q.get("beta2", p.update.beta2);
    q.get("base_rate", p.update.base_rate);
    q.get("epsilon", p.update.epsilon);
    q.get("practice_factor", p.update.practice_factor);
    q.get("efficacy_scale", p.update.efficacy_scale);
    q.finish();
  }
  r.finish();
  checked(r.at(""), [&] { p.validate(); });
}

void read_clinic(Reader r, clinic::ClinicConfig& c) {
  r.get("chiefs", c.chiefs);
  r.get("assistants", c.assistants);
  r.get("first_year", c.first_year);
  r.get("years", c.years);
  r.get("events", c.events);
  r.get("first_event", c.first_event);
  r.get("style_levels", c.style_levels);
  r.get("style_jitter", c.style_jitter);
  r.get("attractor", c.attractor);
  r.get("drift_rate", c.drift_rate);
  r.get("response_spread", c.response_spread);
  r.get("settle_days", c.settle_days);
  r.finish();
  checked(r.at(""), [&] { c.validate(); });
}

void read_replay(Reader r, clinic::ReplayConfig& c, std::size_t& runs) {
  r.get("groups", c.groups);
  r.get("sigma_indiv", c.sigma_indiv);
  r.get("steps_per_cycle", c.steps_per_cycle);
  r.get("init_noise", c.init_noise);
  r.get("runs", runs);
  r.finish();
  checked(r.at(""), [&] {
    c.validate();
    require(runs >= 1, "runs must be >= 1");
  });
}

}  // namespace

void ScenarioConfig::validate() const {
  descriptive.community.validate();
  prescriptive.validate();
  clinic.validate();
  replay.validate();
  require(sliding_window >= 1, "analysis.sliding_window must be >= 1");
}

ScenarioConfig from_json(const json& j) {
  ScenarioConfig c;
  Reader root(&j, "");
  int version = kSchemaVersion;
  root.get("schema_version", version);
  if (version != kSchemaVersion)
    root.fail("schema_version", "unsupported version " + std::to_string(version) +
                                    " (this build reads " + std::to_string(kSchemaVersion) + ")");
  root.get("seed", c.seed);
  read_descriptive(root.child("descriptive"), c.descriptive);
  read_prescriptive(root.child("prescriptive"), c.prescriptive);
  read_clinic(root.child("clinic"), c.clinic);
  read_replay(root.child("replay"), c.replay, c.replay_runs);
  {
    auto a = root.child("analysis");
    a.get("sliding_window", c.sliding_window);
    a.finish();
    if (c.sliding_window < 1) a.fail("sliding_window", "must be >= 1");
  }
  root.finish();
  return c;
}

json to_json(const ScenarioConfig& c) {
  const auto& d = c.descriptive;
  const auto& cc = d.community;
  const auto& p = c.prescriptive;
  return {
      {"schema_version", kSchemaVersion},
      {"seed", c.seed},
      {"descriptive",
       {{"agents", cc.agents},
        {"objective",
         {{"weights", cc.obj.weights()},
          {"means", cc.obj.means()},
          {"std", cc.obj.components().front().std}}},
        {"sigma_indiv", cc.sigma_indiv},
        {"epsilon", cc.epsilon},
        {"prior_samples", cc.prior_samples},
        {"prior_equal_weights", cc.prior_equal_weights},
        {"prior_in_buffer", cc.prior_in_buffer},
        {"init_noise", cc.init_noise},
        {"em_iterations", cc.em_iterations},
        {"em_tol", cc.em_tol},
        {"sinp_variance_floor", cc.sinp_variance_floor},
        {"stratified_groups", cc.stratified_groups},
        {"refit_converged", cc.refit_converged},
        {"buffer", buffer_json(cc.buffer)},
        {"max_steps", d.max_steps},
        {"runs", d.runs},
        {"scan",
         {{"from", d.scan_from}, {"to", d.scan_to}, {"step", d.scan_step},
          {"repeats", d.scan_repeats}}}}},
      {"prescriptive",
       {{"chiefs", p.chiefs},
        {"assistants", p.assistants},
        {"steps", p.steps},
        {"n_controls", p.n_controls},
        {"initial_belief", p.initial_belief},
        {"adherence", prescriptive::adherence_name(p.adherence)},
        {"target", prescriptive::target_mode_name(p.target)},
        {"normalization", belief::normalization_name(p.normalization)},
        {"practice_duration", p.practice_duration},
        {"practice_rollouts", p.practice_rollouts},
        {"max_tests", p.max_tests},
        {"plan_with_enforced", p.plan_with_enforced},
        {"reward",
         {{"diagnostic_cost", p.reward.diagnostic_cost},
          {"bonus_prob", p.reward.bonus_prob},
          {"bonus_value", p.reward.bonus_value},
          {"bonus_min_tests", p.reward.bonus_min_tests},
          {"gamma", p.reward.gamma},
          {"temperature", p.reward.temperature}}},
        {"schedule",
         {{"plan_depth", p.schedule.plan_depth},
          {"replan_every", p.schedule.replan_every},
          {"resample_every", p.schedule.resample_every},
          {"practice_every", p.schedule.practice_every}}},
        {"update",
         {{"beta1", p.update.beta1},
          {"beta2", p.update.beta2},
          {"base_rate", p.update.base_rate},
          {"epsilon", p.update.epsilon},
          {"practice_factor", p.update.practice_factor},
          {"efficacy_scale", p.update.efficacy_scale}}}}},
      {"clinic",
       {{"chiefs", c.clinic.chiefs},
        {"assistants", c.clinic.assistants},
        {"first_year", c.clinic.first_year},
        {"years", c.clinic.years},
        {"events", c.clinic.events},
        {"first_event", c.clinic.first_event},
        {"style_levels", c.clinic.style_levels},
        {"style_jitter", c.clinic.style_jitter},
        {"attractor", c.clinic.attractor},
        {"drift_rate", c.clinic.drift_rate},
        {"response_spread", c.clinic.response_spread},
        {"settle_days", c.clinic.settle_days}}},
      {"replay",
       {{"groups", c.replay.groups},
        {"sigma_indiv", c.replay.sigma_indiv},
        {"steps_per_cycle", c.replay.steps_per_cycle},
        {"init_noise", c.replay.init_noise},
        {"runs", c.replay_runs}}},
      {"analysis", {{"sliding_window", c.sliding_window}}},
  };
}

ScenarioConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j);
}

std::string config_hash(const ScenarioConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace normsim::config
