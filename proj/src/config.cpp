#include "vimlab/config.hpp"

#include <fstream>
#include <set>

#include "vimlab/errors.hpp"

namespace vimlab {

using nlohmann::json;

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  - " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

namespace {

// Collects every problem instead of stopping at the first one.
class Reader {
 public:
  std::vector<std::string> problems;

  // Object at `key` (or an empty object if absent), checked for unknown keys.
  const json& section(const json& parent, const std::string& path, const char* key,
                      std::initializer_list<const char*> known) {
    static const json empty = json::object();
    if (!parent.contains(key)) return empty;
    const json& obj = parent.at(key);
    const std::string here = join(path, key);
    if (!obj.is_object()) {
      problems.push_back(here + ": expected an object");
      return empty;
    }
    reject_unknown(obj, here, known);
    return obj;
  }

  void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [k, _] : obj.items()) {
      if (!allowed.contains(k)) problems.push_back(join(path, k.c_str()) + ": unknown key");
    }
  }

  template <typename T>
  bool get(const json& obj, const std::string& path, const char* key, T& out) {
    if (!obj.contains(key)) return false;
    const json& v = obj.at(key);
    const std::string here = join(path, key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return fail(here, "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0)) {
        return fail(here, std::is_unsigned_v<T> ? "expected a non-negative integer" : "expected an integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return fail(here, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) return fail(here, "expected a string");
    }
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      return fail(here, "has the wrong type");
    }
    return true;
  }

  template <typename T>
  bool get_list(const json& obj, const std::string& path, const char* key, std::vector<T>& out) {
    if (!obj.contains(key)) return false;
    const json& v = obj.at(key);
    const std::string here = join(path, key);
    if (!v.is_array()) return fail(here, "expected an array");
    std::vector<T> values;
    for (std::size_t i = 0; i < v.size(); ++i) {
      T item{};
      json wrap = {{"v", v[i]}};
      if (!get(wrap, here + "[" + std::to_string(i) + "]", "v", item)) return false;
      values.push_back(item);
    }
    out = std::move(values);
    return true;
  }

  void require(bool ok, const std::string& path, const std::string& msg) {
    if (!ok) problems.push_back(path + ": " + msg);
  }

 private:
  static std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

  bool fail(const std::string& path, const std::string& msg) {
    // Strip the synthetic wrapper used for list items.
    std::string p = path;
    if (p.size() > 2 && p.ends_with(".v")) p.resize(p.size() - 2);
    problems.push_back(p + ": " + msg);
    return false;
  }
};

}  // namespace

RunConfig parse_run_config(const json& input) {
  const json& doc = (input.is_object() && input.contains("config") && input.contains("code_version"))
                        ? input.at("config")
                        : input;
  if (!doc.is_object()) throw ConfigError({"<root>: expected a JSON object"});
  Reader rd;
  RunConfig cfg;
  rd.reject_unknown(doc, "", {"dataset", "model", "train", "objective", "eval", "attack", "sweep", "output_dir"});

  // dataset
  const json& ds = rd.section(doc, "", "dataset",
                              {"kind", "dir", "train_subsample", "test_subsample", "blobs"});
  std::string kind = "mnist";
  rd.get(ds, "dataset", "kind", kind);
  if (kind == "mnist") {
    cfg.dataset.kind = DatasetKind::mnist;
  } else if (kind == "blobs") {
    cfg.dataset.kind = DatasetKind::blobs;
  } else {
    rd.require(false, "dataset.kind", "must be \"mnist\" or \"blobs\"");
  }
  if (ds.contains("dir") && !ds.at("dir").is_null()) {
    std::string dir;
    if (rd.get(ds, "dataset", "dir", dir)) cfg.dataset.dir = dir;
  }
  rd.get(ds, "dataset", "train_subsample", cfg.dataset.train_subsample);
  rd.get(ds, "dataset", "test_subsample", cfg.dataset.test_subsample);
  const json& bl = rd.section(ds, "dataset", "blobs",
                              {"classes", "per_class", "separation", "dim", "seed", "test_per_class", "test_seed"});
  rd.get(bl, "dataset.blobs", "classes", cfg.dataset.blobs.classes);
  rd.get(bl, "dataset.blobs", "per_class", cfg.dataset.blobs.per_class);
  rd.get(bl, "dataset.blobs", "separation", cfg.dataset.blobs.separation);
  rd.get(bl, "dataset.blobs", "dim", cfg.dataset.blobs.dim);
  rd.get(bl, "dataset.blobs", "seed", cfg.dataset.blobs.seed);
  rd.get(bl, "dataset.blobs", "test_per_class", cfg.dataset.blobs_test_per_class);
  rd.get(bl, "dataset.blobs", "test_seed", cfg.dataset.blobs_test_seed);
  if (cfg.dataset.kind == DatasetKind::blobs) {
    rd.require(cfg.dataset.blobs.classes >= 2, "dataset.blobs.classes", "must be >= 2");
    rd.require(cfg.dataset.blobs.dim >= cfg.dataset.blobs.classes, "dataset.blobs.dim", "must be >= classes");
    rd.require(cfg.dataset.blobs.per_class >= 1, "dataset.blobs.per_class", "must be >= 1");
    rd.require(cfg.dataset.blobs.separation >= 0.0, "dataset.blobs.separation", "must be >= 0");
  }

  // model: input width and class count follow the dataset unless given
  const json& md = rd.section(doc, "", "model", {"input_dim", "hidden", "latent_dim", "classes"});
  const bool blobs = cfg.dataset.kind == DatasetKind::blobs;
  const std::size_t data_dim = blobs ? cfg.dataset.blobs.dim : 784;
  const std::size_t data_classes = blobs ? cfg.dataset.blobs.classes : 10;
  cfg.model.input_dim = data_dim;
  cfg.model.classes = data_classes;
  rd.get(md, "model", "input_dim", cfg.model.input_dim);
  rd.get(md, "model", "classes", cfg.model.classes);
  rd.get_list(md, "model", "hidden", cfg.model.hidden);
  rd.get(md, "model", "latent_dim", cfg.model.latent_dim);
  rd.require(cfg.model.input_dim == data_dim, "model.input_dim",
             "must equal the dataset width " + std::to_string(data_dim));
  rd.require(cfg.model.classes == data_classes, "model.classes",
             "must equal the dataset class count " + std::to_string(data_classes));
  rd.require(cfg.model.latent_dim >= 1, "model.latent_dim", "must be >= 1");
  for (auto w : cfg.model.hidden) rd.require(w >= 1, "model.hidden", "widths must be >= 1");

  // train
  const json& tr = rd.section(doc, "", "train",
                              {"epochs", "batch_size", "lr", "seed", "eval_every", "latent_samples"});
  rd.get(tr, "train", "epochs", cfg.train.epochs);
  rd.get(tr, "train", "batch_size", cfg.train.batch_size);
  rd.get(tr, "train", "lr", cfg.train.lr);
  rd.get(tr, "train", "seed", cfg.train.seed);
  rd.get(tr, "train", "eval_every", cfg.train.eval_every);
  rd.get(tr, "train", "latent_samples", cfg.train.latent_samples);
  rd.require(cfg.train.epochs >= 1, "train.epochs", "must be >= 1");
  rd.require(cfg.train.batch_size >= 2, "train.batch_size", "must be >= 2");
  rd.require(cfg.train.lr > 0.0, "train.lr", "must be > 0");
  rd.require(cfg.train.eval_every >= 1, "train.eval_every", "must be >= 1");
  rd.require(cfg.train.latent_samples >= 1, "train.latent_samples", "must be >= 1");

  // objective
  const json& ob = rd.section(doc, "", "objective", {"variant", "beta", "sigma", "mmd_prior_samples"});
  std::string variant = "baseline";
  if (rd.get(ob, "objective", "variant", variant)) {
    try {
      cfg.train.objective.variant = parse_variant(variant);
    } catch (const ContractError&) {
      rd.require(false, "objective.variant", "must be one of baseline, vib, vim");
    }
  }
  rd.get(ob, "objective", "beta", cfg.train.objective.beta);
  rd.get(ob, "objective", "sigma", cfg.train.objective.sigma);
  rd.get(ob, "objective", "mmd_prior_samples", cfg.train.objective.mmd_prior_samples);
  rd.require(cfg.train.objective.beta >= 0.0, "objective.beta", "must be >= 0");
  rd.require(cfg.train.objective.sigma > 0.0, "objective.sigma", "must be > 0");
  rd.require(cfg.train.objective.mmd_prior_samples != 1, "objective.mmd_prior_samples", "must be 0 or >= 2");

  // eval
  const json& ev = rd.section(doc, "", "eval",
                              {"repr", "attack", "test_samples", "kmeans_restarts", "attack_count", "attack_source",
                               "attack_target"});
  rd.get(ev, "eval", "repr", cfg.eval.repr);
  rd.get(ev, "eval", "attack", cfg.eval.attack);
  rd.get(ev, "eval", "test_samples", cfg.eval.test_samples);
  rd.get(ev, "eval", "kmeans_restarts", cfg.eval.kmeans_restarts);
  rd.get(ev, "eval", "attack_count", cfg.eval.attack_count);
  rd.get(ev, "eval", "attack_source", cfg.eval.attack_source);
  rd.get(ev, "eval", "attack_target", cfg.eval.attack_target);
  rd.require(cfg.eval.kmeans_restarts >= 1, "eval.kmeans_restarts", "must be >= 1");
  rd.require(cfg.eval.attack_count >= 1, "eval.attack_count", "must be >= 1");
  const auto classes = static_cast<int>(cfg.model.classes);
  rd.require(cfg.eval.attack_source >= 0 && cfg.eval.attack_source < classes, "eval.attack_source", "out of range");
  rd.require(cfg.eval.attack_target >= 0 && cfg.eval.attack_target < classes, "eval.attack_target", "out of range");
  rd.require(cfg.eval.attack_source != cfg.eval.attack_target, "eval.attack_target", "must differ from attack_source");

  // attack
  const json& at = rd.section(doc, "", "attack",
                              {"confidence", "binary_search_steps", "iterations", "step_size", "initial_c",
                               "abort_early"});
  rd.get(at, "attack", "confidence", cfg.attack.confidence);
  rd.get(at, "attack", "binary_search_steps", cfg.attack.binary_search_steps);
  rd.get(at, "attack", "iterations", cfg.attack.iterations);
  rd.get(at, "attack", "step_size", cfg.attack.step_size);
  rd.get(at, "attack", "initial_c", cfg.attack.initial_c);
  rd.get(at, "attack", "abort_early", cfg.attack.abort_early);
  rd.require(cfg.attack.confidence >= 0.0, "attack.confidence", "must be >= 0");
  rd.require(cfg.attack.binary_search_steps >= 1, "attack.binary_search_steps", "must be >= 1");
  rd.require(cfg.attack.iterations >= 1, "attack.iterations", "must be >= 1");
  rd.require(cfg.attack.step_size > 0.0, "attack.step_size", "must be > 0");
  rd.require(cfg.attack.initial_c > 0.0, "attack.initial_c", "must be > 0");

  // sweep
  const json& sw = rd.section(doc, "", "sweep", {"beta", "sigma", "seeds"});
  rd.get_list(sw, "sweep", "beta", cfg.sweep.beta);
  rd.get_list(sw, "sweep", "sigma", cfg.sweep.sigma);
  rd.get_list(sw, "sweep", "seeds", cfg.sweep.seeds);
  for (double b : cfg.sweep.beta) rd.require(b >= 0.0, "sweep.beta", "values must be >= 0");
  for (double s : cfg.sweep.sigma) rd.require(s > 0.0, "sweep.sigma", "values must be > 0");

  std::string out;
  if (rd.get(doc, "", "output_dir", out)) cfg.output_dir = out;

  if (!rd.problems.empty()) throw ConfigError(std::move(rd.problems));
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError({path.string() + ": cannot open config file"});
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError({path.string() + ": not valid JSON (" + e.what() + ")"});
  }
  return parse_run_config(doc);
}

json run_config_to_json(const RunConfig& c) {
  json ds = {{"kind", c.dataset.kind == DatasetKind::mnist ? "mnist" : "blobs"},
             {"dir", c.dataset.dir ? json(c.dataset.dir->string()) : json(nullptr)},
             {"train_subsample", c.dataset.train_subsample},
             {"test_subsample", c.dataset.test_subsample},
             {"blobs",
              {{"classes", c.dataset.blobs.classes},
               {"per_class", c.dataset.blobs.per_class},
               {"separation", c.dataset.blobs.separation},
               {"dim", c.dataset.blobs.dim},
               {"seed", c.dataset.blobs.seed},
               {"test_per_class", c.dataset.blobs_test_per_class},
               {"test_seed", c.dataset.blobs_test_seed}}}};
  return {
      {"dataset", ds},
      {"model",
       {{"input_dim", c.model.input_dim},
        {"hidden", c.model.hidden},
        {"latent_dim", c.model.latent_dim},
        {"classes", c.model.classes}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"lr", c.train.lr},
        {"seed", c.train.seed},
        {"eval_every", c.train.eval_every},
        {"latent_samples", c.train.latent_samples}}},
      {"objective",
       {{"variant", std::string(variant_name(c.train.objective.variant))},
        {"beta", c.train.objective.beta},
        {"sigma", c.train.objective.sigma},
        {"mmd_prior_samples", c.train.objective.mmd_prior_samples}}},
      {"eval",
       {{"repr", c.eval.repr},
        {"attack", c.eval.attack},
        {"test_samples", c.eval.test_samples},
        {"kmeans_restarts", c.eval.kmeans_restarts},
        {"attack_count", c.eval.attack_count},
        {"attack_source", c.eval.attack_source},
        {"attack_target", c.eval.attack_target}}},
      {"attack",
       {{"confidence", c.attack.confidence},
        {"binary_search_steps", c.attack.binary_search_steps},
        {"iterations", c.attack.iterations},
        {"step_size", c.attack.step_size},
        {"initial_c", c.attack.initial_c},
        {"abort_early", c.attack.abort_early}}},
      {"sweep", {{"beta", c.sweep.beta}, {"sigma", c.sweep.sigma}, {"seeds", c.sweep.seeds}}},
      {"output_dir", c.output_dir.string()},
  };
}

}  // namespace vimlab
