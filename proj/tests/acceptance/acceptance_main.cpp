// Acceptance report: one PASS/FAIL line per criterion.
//
// Criteria 1-6 read the MNIST reports collected under the results directory
// (scripts/run_mnist_experiments.sh); a missing report is a FAIL with the
// reason. Criteria 7-11 run live on synthetic data.
//
//   acceptance [--results DIR] [--cli PATH] [--only N]

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support/grad_cases.hpp"
#include "vimlab/adversarial.hpp"
#include "vimlab/errors.hpp"
#include "vimlab/harness.hpp"
#include "vimlab/metrics.hpp"
#include "vimlab/objectives.hpp"
#include "vimlab/report.hpp"

using namespace vimlab;
using namespace testing_support;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// Thrown when a required result file is absent; reported as FAIL.
struct Missing : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path g_results;
fs::path g_cli;

json report_at(const fs::path& dir) {
  const fs::path p = g_results / dir / kReportFile;
  if (!fs::exists(p)) throw Missing("missing " + p.string());
  return read_json(p);
}

double wall_seconds(const fs::path& dir) {
  const fs::path p = g_results / dir / kTimingFile;
  if (!fs::exists(p)) throw Missing("missing " + p.string());
  return read_json(p).at("wall_seconds").get<double>();
}

// Every cell report of a sweep directory, with its directory.
std::vector<std::pair<fs::path, json>> cell_reports(const fs::path& dir) {
  const fs::path root = g_results / dir;
  if (!fs::is_directory(root)) throw Missing("missing " + root.string());
  std::vector<std::pair<fs::path, json>> out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / kReportFile)) {
      out.emplace_back(fs::relative(e.path(), g_results), read_json(e.path() / kReportFile));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (out.empty()) throw Missing("no cell reports under " + root.string());
  return out;
}

double error_of(const json& r) { return r.at("final_test_error").get<double>(); }
int epochs_of(const json& r) { return r.at("config").at("train").at("epochs").get<int>(); }

std::string hours(double s) { return fmt("%.2f h", s / 3600.0); }

// 1. MNIST error levels at K=256 within 60 epochs and 6 h per run.
Outcome k256_errors() {
  const json base = report_at("k256_baseline"), vib = report_at("k256_vib"), vim = report_at("k256_vim");
  const double eb = error_of(base), ei = error_of(vib), em = error_of(vim);
  const double tb = wall_seconds("k256_baseline"), ti = wall_seconds("k256_vib"), tm = wall_seconds("k256_vim");
  bool ok = em <= 1.6 && ei <= 1.7 && eb <= 2.2 && eb > em && eb > ei;
  ok = ok && std::max({tb, ti, tm}) <= 6 * 3600.0;
  for (const json* r : {&base, &vib, &vim}) {
    ok = ok && epochs_of(*r) <= 60 && (*r)["config"]["model"]["latent_dim"] == 256;
  }
  ok = ok && vim["objective"]["beta"] == 1e-3 && vib["objective"]["beta"] == 1e-3;
  return {ok, fmt("test error vim %.2f%% (<= 1.6) vib %.2f%% (<= 1.7) baseline %.2f%% (<= 2.2, worse than both); "
                  "runtimes %s %s %s (<= 6 h)",
                  em, ei, eb, hours(tm).c_str(), hours(ti).c_str(), hours(tb).c_str())};
}

struct Stats {
  double mean = 0.0, sd = 0.0, max_wall = 0.0;
  std::size_t n = 0;
};

Stats quick_stats(const std::string& name, std::string& problems) {
  Stats s;
  std::vector<double> errs;
  for (const auto& [dir, r] : cell_reports(name)) {
    errs.push_back(error_of(r));
    s.max_wall = std::max(s.max_wall, wall_seconds(dir));
    if (epochs_of(r) != 20) problems += " " + name + ": epochs != 20;";
    if (r["config"]["dataset"]["train_subsample"] != 10000) problems += " " + name + ": train_subsample != 10000;";
  }
  s.n = errs.size();
  s.mean = std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(s.n);
  double ss = 0.0;
  for (double e : errs) ss += (e - s.mean) * (e - s.mean);
  s.sd = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
  if (s.n < 3) problems += " " + name + ": fewer than 3 seeds;";
  return s;
}

// 2. VIM <= VIB <= Baseline over 3 seeds on the 10k subsample, each gap
// allowed to close within one pooled standard deviation.
Outcome ordering() {
  std::string problems;
  const Stats b = quick_stats("quick_baseline", problems), i = quick_stats("quick_vib", problems),
              m = quick_stats("quick_vim", problems);
  auto pooled = [](const Stats& x, const Stats& y) { return std::sqrt(0.5 * (x.sd * x.sd + y.sd * y.sd)); };
  const double p_mi = pooled(m, i), p_ib = pooled(i, b);
  const double wall = std::max({b.max_wall, i.max_wall, m.max_wall});
  const bool ok = problems.empty() && m.mean <= i.mean + p_mi && i.mean <= b.mean + p_ib && wall <= 1800.0;
  return {ok, fmt("mean error vim %.3f%% (sd %.3f) vib %.3f%% (sd %.3f) baseline %.3f%% (sd %.3f); "
                  "pooled sd vim/vib %.3f vib/baseline %.3f; slowest run %.1f min (<= 30)%s",
                  m.mean, m.sd, i.mean, i.sd, b.mean, b.sd, p_mi, p_ib, wall / 60.0, problems.c_str())};
}

// 3. K = 2 latent study.
Outcome latent2() {
  const json vim = report_at("latent2_vim"), base = report_at("latent2_baseline");
  const double e = error_of(vim);
  const double adj = vim.at("repr").at("adjR").get<double>(), adj_b = base.at("repr").at("adjR").get<double>();
  const bool k2 = vim["config"]["model"]["latent_dim"] == 2 && base["config"]["model"]["latent_dim"] == 2;
  const bool ok = k2 && e <= 4.5 && adj >= 0.80 && adj >= adj_b;
  return {ok, fmt("vim test error %.2f%% (<= 4.5) adjR %.3f (>= 0.80); baseline adjR %.3f (vim >= baseline)", e, adj,
                  adj_b)};
}

// 4. Adversarial distances on the first ten zeros, target one.
Outcome robustness() {
  const json vim = report_at("k256_vim"), base = report_at("k256_baseline");
  if (!vim.contains("robustness") || !base.contains("robustness")) throw Missing("k256 reports lack robustness");
  const json &rv = vim["robustness"], &rb = base["robustness"];
  if (!rv["valid"].get<bool>() || !rb["valid"].get<bool>()) {
    return {false, fmt("no successful attack (vim %d, baseline %d successes)", rv["successes"].get<int>(),
                       rb["successes"].get<int>())};
  }
  const double l2v = rv["mean_l2"].get<double>(), l2b = rb["mean_l2"].get<double>();
  const double liv = rv["mean_linf"].get<double>(), lib = rb["mean_linf"].get<double>();
  const bool ok = l2v >= 1.2 * l2b && liv > lib;
  return {ok, fmt("mean L2 vim %.3f baseline %.3f (ratio %.2f, >= 1.2); mean Linf vim %.3f > baseline %.3f; "
                  "successes %d/%d",
                  l2v, l2b, l2v / l2b, liv, lib, rv["successes"].get<int>(), rb["successes"].get<int>())};
}

// 5. Representation quality at K = 256.
Outcome representation() {
  const json vim = report_at("k256_vim"), base = report_at("k256_baseline");
  const double hv = vim.at("repr").at("hoyer").get<double>(), hb = base.at("repr").at("hoyer").get<double>();
  const double av = vim.at("repr").at("adjR").get<double>(), ab = base.at("repr").at("adjR").get<double>();
  const bool ok = hv >= hb - 0.01 && av >= ab - 0.01;
  return {ok, fmt("normalized hoyer vim %.3f baseline %.3f; adjR vim %.3f baseline %.3f (tolerance 0.01)", hv, hb, av,
                  ab)};
}

// 6. VIM error versus beta at sigma = 1: minimum strictly inside the grid.
Outcome sweep_shape() {
  std::map<double, std::vector<double>> by_beta;
  for (const auto& [dir, r] : cell_reports("beta_sweep_vim")) {
    if (r["objective"]["sigma"].get<double>() != 1.0 || r["objective"]["variant"] != "vim") continue;
    by_beta[r["objective"]["beta"].get<double>()].push_back(error_of(r));
  }
  const std::vector<double> grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  std::string curve;
  std::vector<double> err;
  for (double b : grid) {
    if (!by_beta.contains(b)) throw Missing(fmt("beta_sweep_vim has no cell for beta %g", b));
    const auto& v = by_beta[b];
    err.push_back(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
    curve += fmt(" %g:%.2f%%", b, err.back());
  }
  const double inner = *std::min_element(err.begin() + 1, err.end() - 1);
  const bool ok = inner <= err.front() && inner < err.back();
  return {ok, "error by beta" + curve + fmt("; interior minimum %.2f%% vs ends %.2f%% / %.2f%%", inner, err.front(),
                                            err.back())};
}

// 7. Central finite differences, 20 instances per op and per composite loss.
Outcome gradients() {
  double worst = 0.0;
  std::string where;
  std::size_t cases = 0;
  for (const auto& name : op_names()) {
    std::mt19937_64 rng(std::hash<std::string>{}(name) ^ 0xacce97ULL);
    for (int i = 0; i < 20; ++i) {
      Case c = makers().at(name)(rng);
      const auto r = grad_check(c.build, c.inputs, 1e-5);
      ++cases;
      if (r.max_rel_err >= worst) {
        worst = r.max_rel_err;
        where = name;
      }
    }
  }
  for (Variant v : {Variant::baseline, Variant::vib, Variant::vim}) {
    for (std::uint64_t i = 0; i < 20; ++i) {
      const auto c = composite_case(v, 1000 + i);
      const auto r = grad_check(c.build, c.params, 1e-5);
      ++cases;
      if (r.max_rel_err >= worst) {
        worst = r.max_rel_err;
        where = "loss/" + std::string(variant_name(v));
      }
    }
  }
  return {worst <= 1e-4, fmt("%zu ops + 3 losses, %zu instances; max rel err %.2e (%s) <= 1e-4", op_names().size(),
                             cases, worst, where.c_str())};
}

Tensor normal(std::size_t rows, std::size_t cols, double mean, std::mt19937_64& rng) {
  Tensor t({rows, cols});
  std::normal_distribution<double> d(mean, 1.0);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

double kl_value(const Tensor& mu, const Tensor& lv, double sigma) {
  Graph g(Graph::Mode::inference);
  return gauss_kl(g, mu, lv, sigma).item();
}

// 8. KL and MMD properties.
Outcome divergences() {
  std::vector<std::string> bad;
  const double kl0 = kl_value(Tensor({1, 4}, 0.0), Tensor({1, 4}, 0.0), 1.0);
  if (std::abs(kl0) > 1e-12) bad.push_back(fmt("kl(0,0,1) = %g", kl0));

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3, 3), us(0.1, 5);
  double kl_min = INFINITY;
  for (int i = 0; i < 1000; ++i) {
    // Scales down to 1e-3 put some draws right next to the prior.
    const double sigma = us(rng), scale = std::pow(10.0, -3.0 * std::uniform_real_distribution<double>()(rng));
    Tensor mu({1, 3}), lv({1, 3});
    for (auto& v : mu.data()) v = scale * u(rng);
    for (auto& v : lv.data()) v = 2.0 * std::log(sigma) + scale * u(rng);
    kl_min = std::min(kl_min, kl_value(mu, lv, sigma));
  }
  if (kl_min < 0.0) bad.push_back(fmt("kl min %g < 0", kl_min));

  double worst_se = 0.0;
  std::mt19937_64 cfg(23);
  for (int c = 0; c < 10; ++c) {
    const std::size_t k = 1 + c % 3;
    Tensor mu({1, k}), lv({1, k});
    for (auto& v : mu.data()) v = std::uniform_real_distribution<double>(-1.5, 1.5)(cfg);
    for (auto& v : lv.data()) v = std::uniform_real_distribution<double>(-2, 1.5)(cfg);
    const double sigma = std::uniform_real_distribution<double>(0.5, 2.0)(cfg);
    const double closed = kl_value(mu, lv, sigma);
    std::mt19937_64 draw(100 + c);
    std::normal_distribution<double> n01;
    double sum = 0, sum_sq = 0;
    constexpr int kDraws = 1000000;
    for (int i = 0; i < kDraws; ++i) {
      double lr = 0;
      for (std::size_t d = 0; d < k; ++d) {
        const double sd = std::exp(0.5 * lv[d]), e = n01(draw), z = mu[d] + sd * e;
        lr += -0.5 * e * e - std::log(sd) + 0.5 * (z / sigma) * (z / sigma) + std::log(sigma);
      }
      sum += lr;
      sum_sq += lr * lr;
    }
    const double mean = sum / kDraws, var = sum_sq / kDraws - mean * mean;
    worst_se = std::max(worst_se, std::abs(mean - closed) / std::sqrt(var / kDraws));
  }
  if (worst_se > 3.0) bad.push_back(fmt("monte carlo off by %.2f se", worst_se));

  double mmd_min = INFINITY, mmd_same = 0.0;
  std::uniform_int_distribution<std::size_t> rows(2, 40), cols(1, 8);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = cols(rng);
    // Half the pairs share a distribution, where the estimate sits near zero.
    const double ma = u(rng), mb = i % 2 ? ma : u(rng);
    Tensor a = normal(rows(rng), k, ma, rng), b = normal(rows(rng), k, mb, rng);
    mmd_min = std::min(mmd_min, mmd_value(a, b));
    mmd_same = std::max(mmd_same, std::abs(mmd_value(a, a.clone())));
  }
  if (mmd_min < -1e-12) bad.push_back(fmt("mmd min %g < 0", mmd_min));
  if (mmd_same > 1e-12) bad.push_back(fmt("mmd of identical sets %g", mmd_same));

  std::vector<double> null;
  for (std::uint64_t s = 0; s < 100; ++s) {
    std::mt19937_64 r(1000 + s);
    Tensor a = normal(512, 8, 0, r), b = normal(512, 8, 0, r);
    null.push_back(mmd_value(a, b));
  }
  std::sort(null.begin(), null.end());
  const double p99 = null[98];
  std::mt19937_64 r(77);
  Tensor shifted = normal(512, 8, 5, r), prior = normal(512, 8, 0, r);
  const double sep = mmd_value(shifted, prior);
  if (sep < 10 * p99) bad.push_back(fmt("N(5) mmd %g < 10 x p99 %g", sep, p99));

  std::string detail = fmt("kl(0,0,1)=%g; kl min %.3g over 1e3; MC worst %.2f se over 10 x 1e6; mmd min %.2g, "
                           "identical %.2g; N(5) %.3f vs null p99 %.4f (x%.0f)",
                           kl0, kl_min, worst_se, mmd_min, mmd_same, sep, p99, sep / p99);
  for (const auto& b : bad) detail += "; " + b;
  return {bad.empty(), detail};
}

double pair_counting_ari(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  double both = 0, in_a = 0, in_b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
    }
  }
  const double pairs = n * (n - 1) / 2.0, expected = in_a * in_b / pairs, top = 0.5 * (in_a + in_b);
  return top == expected ? 1.0 : (both - expected) / (top - expected);
}

// 9. Hoyer, adjR, ARI and k-means properties.
Outcome metrics() {
  std::vector<std::string> bad;
  for (std::size_t d : {2u, 3u, 10u, 256u}) {
    std::vector<double> one(d, 0.0), ones(d, 1.0);
    one[d / 2] = 3.7;
    if (hoyer(one) != 1.0) bad.push_back(fmt("hoyer one-hot d=%zu is %.17g", d, hoyer(one)));
    if (hoyer(ones) != 0.0) bad.push_back(fmt("hoyer all-ones d=%zu is %.17g", d, hoyer(ones)));
  }
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    std::vector<int> y(100);
    const int k = std::uniform_int_distribution<int>(1, 10)(rng);
    for (auto& v : y) v = std::uniform_int_distribution<int>(0, k - 1)(rng);
    if (adj_r(y, y) != 1.0) bad.push_back("adjR of identical partitions != 1");
  }
  double ari_dev = 0.0;
  for (int i = 0; i < 200; ++i) {
    std::vector<int> a(30), b(30);
    const int ka = std::uniform_int_distribution<int>(1, 6)(rng), kb = std::uniform_int_distribution<int>(1, 6)(rng);
    for (auto& v : a) v = std::uniform_int_distribution<int>(0, ka - 1)(rng);
    for (auto& v : b) v = std::uniform_int_distribution<int>(0, kb - 1)(rng);
    ari_dev = std::max(ari_dev, std::abs(standard_ari(a, b) - pair_counting_ari(a, b)));
  }
  if (ari_dev > 1e-12) bad.push_back(fmt("ari deviates by %g", ari_dev));
  std::size_t passes = 0, rises = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Tensor pts = normal(300, 5, 0, rng);
    const auto res = kmeans(pts, 8, s);
    for (std::size_t t = 1; t < res.inertia_trace.size(); ++t, ++passes) {
      rises += res.inertia_trace[t] > res.inertia_trace[t - 1];
    }
  }
  if (rises > 0) bad.push_back(fmt("k-means inertia rose in %zu passes", rises));
  std::string detail = fmt("hoyer exact on one-hot/all-ones; adjR = 1 on 50 identical partitions; ARI max deviation "
                           "%.1e over 200 30-point instances; inertia monotone over %zu passes",
                           ari_dev, passes);
  for (const auto& b : bad) detail += "; " + b;
  return {bad.empty(), detail};
}

StochasticClassifier linear_toy(const std::vector<double>& a, double b) {
  const std::size_t d = a.size();
  StochasticClassifier m(ModelShape{d, {}, d, 2});
  for (std::size_t i = 0; i < d; ++i) m.encoder().front().weight[i * 2 * d + i] = 1.0;
  for (std::size_t i = 0; i < d; ++i) m.decoder().weight[i * 2 + 1] = a[i];
  m.decoder().bias[1] = b;
  return m;
}

// 10. Linear toy classifier: L2 within 5% of the distance to the boundary;
// box and success soundness on every attack.
Outcome attacks() {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.1, 0.9), gap_d(0.05, 0.4);
  const AttackConfig cfg;
  double worst = 0.0;
  std::size_t n = 0, box = 0, unsound = 0, failed = 0;
  for (std::size_t d : {2u, 10u, 64u}) {
    for (int i = 0; i < 10;) {
      std::vector<double> a(d), x(d);
      for (auto& v : a) v = gauss(rng);
      for (auto& v : x) v = unit(rng);
      const double norm = std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
      const double gap = gap_d(rng);
      const double b = -std::inner_product(a.begin(), a.end(), x.begin(), 0.0) - gap * norm;
      bool inside = true;
      for (std::size_t j = 0; j < d; ++j) inside = inside && std::abs(x[j] + gap * a[j] / norm - 0.5) < 0.48;
      if (!inside) continue;
      ++i;
      const auto m = linear_toy(a, b);
      const auto r = cw_l2_attack(m, Tensor({1, d}, x), 1, cfg);
      ++n;
      for (double v : r.adversarial.data()) box += v < -1e-12 || v > 1.0 + 1e-12;
      unsound += r.success != (m.predict(r.adversarial).classes[0] == 1);
      if (!r.success) {
        ++failed;
        continue;
      }
      worst = std::max(worst, std::abs(r.l2 - gap) / gap);
    }
  }
  const bool ok = failed == 0 && box == 0 && unsound == 0 && worst <= 0.05;
  return {ok, fmt("%zu attacks in d = 2/10/64: worst relative L2 error %.2f%% (<= 5%%); %zu failed, %zu box "
                  "violations, %zu unsound",
                  n, 100 * worst, failed, box, unsound)};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// 11. cmd_train twice with the same seed gives byte-identical reports.
Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "vimlab_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<std::string> bad;
  for (const char* variant : {"baseline", "vib", "vim"}) {
    const json cfg = {
        {"dataset", {{"kind", "blobs"}, {"blobs", {{"per_class", 100}, {"test_per_class", 100}}}}},
        {"model", {{"hidden", {32}}, {"latent_dim", 4}}},
        {"train", {{"epochs", 10}, {"batch_size", 32}, {"lr", 1e-2}, {"seed", 17}}},
        {"objective", {{"variant", variant}, {"beta", 1e-2}, {"sigma", 1.0}}},
        {"eval", {{"repr", true}, {"attack", true}, {"test_samples", 3}}},
        {"attack", {{"binary_search_steps", 3}, {"iterations", 100}}}};
    const fs::path config = dir / (std::string(variant) + ".json");
    write_json(config, cfg);
    std::string reports[2];
    for (int run = 0; run < 2; ++run) {
      const fs::path out = dir / (std::string(variant) + "_" + std::to_string(run));
      const std::string cmd =
          g_cli.string() + " train --quiet --config " + config.string() + " --out " + out.string() + " >/dev/null 2>&1";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        bad.push_back(std::string(variant) + ": train exited with status " + std::to_string(status));
        break;
      }
      reports[run] = slurp(out / kReportFile);
    }
    if (reports[0].empty() || reports[0] != reports[1]) bad.push_back(std::string(variant) + ": reports differ");
  }
  std::string detail = "two cmd_train runs per objective (blobs, seed 17, repr + attack + sampled error)";
  detail += bad.empty() ? ": reports byte-identical" : "";
  for (const auto& b : bad) detail += "; " + b;
  return {bad.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  g_results = VIMLAB_RESULTS_DIR;
  g_cli = VIMLAB_CLI;
  int only = 0;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--results") {
      g_results = argv[i + 1];
    } else if (flag == "--cli") {
      g_cli = argv[i + 1];
    } else if (flag == "--only") {
      only = std::atoi(argv[i + 1]);
    } else {
      std::fprintf(stderr, "usage: %s [--results DIR] [--cli PATH] [--only N]\n", argv[0]);
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"MNIST test error at K=256", k256_errors},
      {"objective ordering over 3 seeds (10k subsample)", ordering},
      {"2-d latent error and adjR", latent2},
      {"adversarial distance ordering", robustness},
      {"representation ordering (Hoyer, adjR)", representation},
      {"error vs beta has an interior minimum", sweep_shape},
      {"gradient suite", gradients},
      {"divergence suite", divergences},
      {"metric suite", metrics},
      {"attack suite", attacks},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<int>(i + 1) != only) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const Missing& e) {
      o = {false, e.what()};
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %2zu  %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
