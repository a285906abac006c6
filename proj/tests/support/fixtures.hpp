#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "moje/corpus.hpp"
#include "moje/moje.hpp"
#include "moje/synthetic.hpp"

namespace moje::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("moje-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline LabeledExample benign(std::string text) { return {std::move(text), Label::benign, {}, {}}; }

inline LabeledExample jailbreak(std::string text, std::string category) {
  return {std::move(text), Label::jailbreak, std::move(category), {}};
}

/// Small grid that keeps unit tests fast.
inline HyperGrid small_grid() {
  HyperGrid g;
  g.lr_l2 = {0.1, 1.0};
  g.gbt = {{30, 3, 0.3}};
  g.cv_folds = 3;
  return g;
}

inline synthetic::CorpusOptions small_corpus_options(std::uint64_t seed = 3) {
  synthetic::CorpusOptions o;
  o.benign = 400;
  o.per_category = 60;
  o.seed = seed;
  return o;
}

/// Four-expert model trained on a small synthetic corpus; built once per
/// process.
inline const MojeModel& fixture_model() {
  static const MojeModel model = [] {
    ExpertConfig cfg;
    cfg.grid = small_grid();
    cfg.seed = 11;
    return train_moje(synthetic::make_corpus(small_corpus_options()), cfg).model;
  }();
  return model;
}

// ---- independent oracles -----------------------------------------------------

/// Direct transcription of the max/avg decision rule.
inline std::pair<double, bool> oracle_combine(const std::vector<double>& p, double tau) {
  double mx = p[0];
  for (double v : p)
    if (v > mx) mx = v;
  if (mx >= tau) return {mx, true};
  double s = 0.0;
  for (double v : p) s += v;
  return {s / static_cast<double>(p.size()), false};
}

inline double entropy(const std::vector<double>& counts) {
  double n = 0.0;
  for (double c : counts) n += c;
  double h = 0.0;
  for (double c : counts)
    if (c > 0) h -= (c / n) * std::log(c / n);
  return h;
}

/// I(X;Y) = H(X) + H(Y) - H(X,Y) over a 2x2 table.
inline double oracle_mi(const std::uint64_t c[2][2]) {
  const double a = c[0][0], b = c[0][1], d = c[1][0], e = c[1][1];
  if (a + b + d + e == 0) return 0.0;
  return entropy({a + b, d + e}) + entropy({a + d, b + e}) - entropy({a, b, d, e});
}

/// Exhaustive pairwise AUC as an exact fraction (wins*2 + ties) / (2*P*N).
inline std::pair<std::uint64_t, std::uint64_t> oracle_auc_fraction(const std::vector<double>& scores,
                                                                   const std::vector<Label>& labels) {
  std::uint64_t num = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != Label::jailbreak) continue;
    ++pos;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != Label::benign) continue;
      if (scores[i] > scores[j]) num += 2;
      else if (scores[i] == scores[j]) num += 1;
    }
  }
  for (auto l : labels) neg += l == Label::benign;
  return {num, 2 * pos * neg};
}

}  // namespace moje::testing
