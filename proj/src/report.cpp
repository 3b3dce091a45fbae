#include "vimlab/report.hpp"

#include <charconv>
#include <fstream>

#include "vimlab/errors.hpp"

#ifndef VIMLAB_VERSION
#define VIMLAB_VERSION "unknown"
#endif

namespace vimlab {

using nlohmann::json;

std::string code_version() { return std::string("vimlab ") + VIMLAB_VERSION; }

json history_to_json(const TrainHistory& history) {
  json epochs = json::array();
  for (const auto& e : history.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"train_nll", e.train_nll},
                      {"train_penalty", e.train_penalty},
                      {"test_error", e.test_error ? json(*e.test_error) : json(nullptr)}});
  }
  return epochs;
}

json repr_to_json(const ReprReport& r) {
  return {{"adjR", r.adj_r},
          {"standard_ari", r.standard_ari},
          {"hoyer", r.hoyer_normalized},
          {"hoyer_raw", r.hoyer_raw},
          {"test_error", r.test_error},
          {"kmeans_inertia", r.kmeans_inertia}};
}

json robustness_to_json(const RobustnessReport& rep) {
  json attacks = json::array();
  for (const auto& a : rep.attacks) {
    json cands = json::array();
    for (const auto& c : a.candidates) cands.push_back({{"c", c.c}, {"success", c.success}, {"l2", c.l2}});
    attacks.push_back({{"source_class", a.source_class},
                       {"target", a.target},
                       {"success", a.success},
                       {"l1", a.l1},
                       {"l2", a.l2},
                       {"linf", a.linf},
                       {"candidates", cands}});
  }
  return {{"source_class", rep.source_class},
          {"target_class", rep.target_class},
          {"attacks", attacks},
          {"successes", rep.successes},
          {"valid", rep.valid},
          {"mean_l1", rep.valid ? json(rep.mean_l1) : json(nullptr)},
          {"mean_l2", rep.valid ? json(rep.mean_l2) : json(nullptr)},
          {"mean_linf", rep.valid ? json(rep.mean_linf) : json(nullptr)}};
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_json(const std::filesystem::path& path, const json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << doc.dump(2) << '\n';
  if (!os) throw DataError("failed writing " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": not valid JSON (" + e.what() + ")");
  }
}

}  // namespace vimlab
