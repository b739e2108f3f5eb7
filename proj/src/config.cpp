#include "mgids/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mgids/errors.hpp"

namespace mgids::config {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Reads keys of one section and remembers which ones were consumed.
class Section {
 public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  bool has(const std::string& key) {
    used_.insert(key);
    return tree_ && tree_->find(key) != tree_->not_found();
  }

  std::string text(const std::string& key) { return trim(tree_->get<std::string>(key)); }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    out = parse<T>(key, text(key));
  }

  void read_bool(const std::string& key, bool& out) {
    if (!has(key)) return;
    const auto v = text(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
      out = true;
    } else if (v == "false" || v == "0" || v == "no" || v == "off") {
      out = false;
    } else {
      fail(key, v, "a boolean");
    }
  }

  template <class T>
  std::vector<T> list(const std::string& key, char sep = ',') {
    std::vector<T> out;
    for (const auto& item : split(text(key), sep)) out.push_back(parse<T>(key, item));
    return out;
  }

  template <class T>
  T parse(const std::string& key, const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || v.empty()) {
      fail(key, v, std::is_floating_point_v<T> ? "a number" : "an integer");
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& v, const char* what) {
    throw UsageError("config [" + name_ + "] " + key + " = '" + v + "' is not " + what);
  }

  void check_unused() const {
    if (!tree_) return;
    for (const auto& [key, _] : *tree_) {
      if (!used_.contains(key)) {
        throw UsageError("config [" + name_ + "] has unknown key '" + key + "'");
      }
    }
  }

 private:
  std::string name_;
  const pt::ptree* tree_;
  std::set<std::string> used_;
};

void read_gbdt(Section& s, gbdt::GbdtParams& p) {
  s.read("num_leaves", p.num_leaves);
  s.read("learning_rate", p.learning_rate);
  s.read("feature_fraction", p.feature_fraction);
  s.read("bagging_fraction", p.bagging_fraction);
  s.read("bagging_freq", p.bagging_freq);
  s.read("num_iterations", p.num_iterations);
  s.read("early_stopping_rounds", p.early_stopping_rounds);
  s.read("max_bins", p.max_bins);
  s.read("lambda_l2", p.lambda_l2);
  s.read("min_samples_leaf", p.min_samples_leaf);
  s.read("seed", p.seed);
}

void read_attack(Section& s, attack::AttackSpec& a) {
  s.read("onset", a.onset);
  if (s.has("targets")) a.targets = s.list<int>("targets");
  auto& p = a.params;
  s.read("bias", p.bias);
  s.read("ramp_slope", p.ramp_slope);
  s.read("slow_ramp_slope", p.slow_ramp_slope);
  s.read("amplitude", p.amplitude);
  if (s.has("frequency_hz")) {
    p.omega = sim::kTwoPi * s.parse<double>("frequency_hz", s.text("frequency_hz"));
  }
  s.read("stealth_alpha", p.stealth_alpha);
  s.read("stealth_amplitude", p.stealth_amplitude);
  s.read("stealth_seed", p.stealth_seed);
}

sim::LoadProfile read_profile(Section& s, const std::string& key) {
  sim::LoadProfile prof;
  for (const auto& item : split(s.text(key), ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) s.fail(key, item, "a 'time:value' pair");
    prof.steps.emplace_back(s.parse<double>(key, parts[0]), s.parse<double>(key, parts[1]));
  }
  for (std::size_t i = 1; i < prof.steps.size(); ++i) {
    if (prof.steps[i].first < prof.steps[i - 1].first) {
      throw UsageError("config [plant] " + key + " steps must be sorted by time");
    }
  }
  return prof;
}

// Per-DG droop values: one number for all DGs or a list of ten.
void read_per_dg(Section& s, const std::string& key, std::vector<sim::DroopParams>& droop,
                 double sim::DroopParams::*field) {
  if (!s.has(key)) return;
  const auto values = s.list<double>(key);
  if (values.size() == 1) {
    for (auto& d : droop) d.*field = values[0];
  } else if (values.size() == droop.size()) {
    for (std::size_t i = 0; i < droop.size(); ++i) droop[i].*field = values[i];
  } else {
    throw UsageError("config [droop] " + key + " needs 1 or " + std::to_string(droop.size()) +
                     " values");
  }
}

}  // namespace

const attack::AttackSpec& PipelineConfig::scenario(attack::AttackMode mode) const {
  for (const auto& s : scenarios) {
    if (s.mode == mode) return s;
  }
  throw UsageError("scenario '" + std::string(attack::mode_name(mode)) +
                   "' is not configured");
}

void PipelineConfig::validate() const {
  sim.validate();
  if (scenarios.empty()) throw UsageError("no scenarios configured");
  std::set<attack::AttackMode> seen;
  for (const auto& s : scenarios) {
    if (!seen.insert(s.mode).second) {
      throw UsageError("scenario '" + std::string(attack::mode_name(s.mode)) + "' listed twice");
    }
    s.validate(sim.t_end);
  }
  dataset.split.validate();
  if (dataset.chunk_rows == 0) throw UsageError("dataset chunk_rows must be > 0");
  const double keep = dataset.downsample.normal_keep_fraction;
  if (!(keep > 0.0 && keep <= 1.0)) {
    throw UsageError("normal_keep_fraction must lie in (0, 1]");
  }
  binary.validate();
  multiclass.validate();
  if (binary.objective != gbdt::Objective::Binary) throw UsageError("binary params mis-set");
  if (multiclass.objective != gbdt::Objective::Multiclass || multiclass.num_class != 7) {
    throw UsageError("multiclass params must use 7 classes");
  }
  kd.validate();
  if (eval.latency_reps - eval.latency_warmup < 10) {
    throw UsageError("eval latency_reps must leave at least 10 timed repetitions");
  }
  if (!(eval.trajectory_to > eval.trajectory_from)) {
    throw UsageError("eval trajectory window is empty");
  }
}

PipelineConfig default_config() {
  PipelineConfig cfg;
  for (auto mode : attack::kAllModes) {
    attack::AttackSpec spec;
    spec.mode = mode;
    cfg.scenarios.push_back(spec);
  }
  return cfg;
}

PipelineConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw UsageError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  PipelineConfig cfg = default_config();
  std::map<std::string, Section> sections;
  auto section = [&](const std::string& name) -> Section& {
    auto it = sections.find(name);
    if (it == sections.end()) {
      const auto child = tree.find(name);
      it = sections
               .emplace(name, Section(name, child == tree.not_found() ? nullptr : &child->second))
               .first;
    }
    return it->second;
  };

  {
    auto& s = section("paths");
    if (s.has("out")) cfg.paths.out = s.text("out");
    if (s.has("scenarios")) cfg.paths.scenario_dir = s.text("scenarios");
    if (s.has("dataset")) cfg.paths.dataset_dir = s.text("dataset");
    if (s.has("models")) cfg.paths.model_dir = s.text("models");
    if (s.has("reports")) cfg.paths.report_dir = s.text("reports");
  }
  {
    auto& s = section("sim");
    auto& c = cfg.sim;
    s.read("dt", c.dt);
    s.read("t_end", c.t_end);
    s.read("ctrl_period", c.ctrl_period);
    if (s.has("f_star")) c.omega_star = sim::kTwoPi * s.parse<double>("f_star", s.text("f_star"));
    s.read("v_star", c.v_star);
  }
  {
    auto& s = section("droop");
    read_per_dg(s, "m", cfg.sim.droop, &sim::DroopParams::m);
    read_per_dg(s, "n", cfg.sim.droop, &sim::DroopParams::n);
    read_per_dg(s, "p_star", cfg.sim.droop, &sim::DroopParams::p_star);
    read_per_dg(s, "q_star", cfg.sim.droop, &sim::DroopParams::q_star);
  }
  {
    auto& s = section("secondary");
    auto& g = cfg.sim.gains;
    s.read("k_p", g.k_p);
    s.read("k_q", g.k_q);
    s.read("c_f", g.c_f);
    s.read("c_v", g.c_v);
    if (s.has("weights")) {
      // Rows separated by ';', entries by ','.
      std::vector<double> w;
      int n = 0;
      for (const auto& row : split(s.text("weights"), ';')) {
        std::vector<double> r;
        for (const auto& item : split(row, ',')) r.push_back(s.parse<double>("weights", item));
        w.insert(w.end(), r.begin(), r.end());
        ++n;
      }
      cfg.sim.graph = sim::CommGraph(n, std::move(w));
    }
  }
  {
    auto& s = section("plant");
    auto& p = cfg.sim.plant;
    s.read("tau_p", p.tau_p);
    s.read("tau_q", p.tau_q);
    if (s.has("p_load")) p.p_load = read_profile(s, "p_load");
    if (s.has("q_load")) p.q_load = read_profile(s, "q_load");
    if (s.has("bus_map")) {
      const auto buses = s.list<int>("bus_map");
      if (buses.size() != p.bus_map.size()) {
        throw UsageError("config [plant] bus_map needs one bus per DG");
      }
      for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i] < 1 || buses[i] > data::kNumBus) {
          throw UsageError("config [plant] bus_map entries must lie in 1..3");
        }
        p.bus_map[i] = buses[i] - 1;
      }
    }
    s.read("k_pv", p.k_pv);
    s.read("k_iv", p.k_iv);
    s.read("k_pc", p.k_pc);
    s.read("k_ic", p.k_ic);
  }
  {
    auto& s = section("noise");
    auto& nz = cfg.sim.noise;
    s.read("ripple_amp_v", nz.ripple_amp_v);
    s.read("ripple_amp_i", nz.ripple_amp_i);
    s.read("f_sw", nz.f_sw);
    s.read("quant_step_v", nz.quant_step_v);
    s.read("quant_step_p", nz.quant_step_p);
    s.read("quant_step_f", nz.quant_step_f);
    s.read("jitter_max", nz.jitter_max);
    s.read("sample_jitter", nz.sample_jitter);
    s.read("seed", nz.seed);
  }
  {
    auto& s = section("attack");
    if (s.has("modes")) {
      cfg.scenarios.clear();
      for (const auto& name : split(s.text("modes"), ',')) {
        attack::AttackSpec spec;
        spec.mode = attack::mode_from_name(name);
        cfg.scenarios.push_back(spec);
      }
    }
    // Shared keys first, then per-mode sections override them.
    attack::AttackSpec shared;
    read_attack(s, shared);
    for (auto& spec : cfg.scenarios) {
      const auto mode = spec.mode;
      spec = shared;
      spec.mode = mode;
      read_attack(section("attack." + std::string(attack::mode_name(mode))), spec);
    }
  }
  {
    auto& s = section("dataset");
    auto& d = cfg.dataset;
    s.read("normal_keep_fraction", d.downsample.normal_keep_fraction);
    s.read("onset_window", d.downsample.onset_window);
    s.read("downsample_seed", d.downsample.seed);
    if (s.has("split")) {
      const auto r = s.list<double>("split");
      if (r.size() != 3) throw UsageError("config [dataset] split needs three ratios");
      d.split.ratios = {r[0], r[1], r[2]};
    }
    s.read("split_seed", d.split.seed);
    s.read("chunk_rows", d.chunk_rows);
    s.read_bool("rescale", d.rescale);
    s.read_bool("float32", d.float32);
  }
  read_gbdt(section("gbdt.binary"), cfg.binary);
  read_gbdt(section("gbdt.multiclass"), cfg.multiclass);
  read_gbdt(section("gbdt.student"), cfg.kd.student);
  {
    auto& s = section("kd");
    s.read("alpha", cfg.kd.alpha);
    s.read("beta", cfg.kd.beta);
    s.read("temperature", cfg.kd.temperature);
    s.read("cache_salt", cfg.kd_cache_salt);
  }
  {
    auto& s = section("eval");
    auto& e = cfg.eval;
    s.read("latency_batch", e.latency_batch);
    s.read("latency_reps", e.latency_reps);
    s.read("latency_warmup", e.latency_warmup);
    s.read("demo_n", e.demo_n);
    s.read("demo_seed", e.demo_seed);
    if (s.has("trajectory_mode")) e.trajectory_mode = attack::mode_from_name(s.text("trajectory_mode"));
    s.read("trajectory_from", e.trajectory_from);
    s.read("trajectory_to", e.trajectory_to);
  }

  for (const auto& [name, child] : tree) {
    if (child.empty() && !child.data().empty()) {
      throw UsageError("config key '" + name + "' is outside any section");
    }
    if (!sections.contains(name)) throw UsageError("config has unknown section [" + name + "]");
  }
  for (const auto& [_, s] : sections) s.check_unused();
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config '" + path.string() + "'");
  return parse_config(in);
}

}  // namespace mgids::config
