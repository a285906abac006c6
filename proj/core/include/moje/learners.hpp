#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "moje/boosted_trees.hpp"
#include "moje/logistic.hpp"

namespace moje {

enum class ModelFamily : std::uint8_t { logistic, boosted_trees };

std::string_view to_string(ModelFamily family);

struct GbtSetting {
  int num_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.3;
  bool operator==(const GbtSetting&) const = default;
};

struct HyperGrid {
  std::vector<double> lr_l2;
  std::vector<GbtSetting> gbt;
  std::size_t cv_folds = 5;
  double beta = 0.5;
  int lr_max_iters = 500;
  double lr_tol = 1e-5;
  double min_child_weight = 1.0;

  /// l2 in {0.01, 0.1, 1, 10}; trees {50, 100, 200} x depth {3, 6} x
  /// learning rate {0.1, 0.3}.
  static HyperGrid defaults();
  /// JSON document: {"lr": {"l2": [...]}, "gbt": {"num_trees": [...],
  /// "max_depth": [...], "learning_rate": [...]}, "cv_folds": 5, "beta": 0.5}.
  /// "gbt" may instead be an explicit array of {"num_trees", "max_depth",
  /// "learning_rate"} objects. Missing keys keep their defaults; an empty
  /// list disables a family.
  static HyperGrid from_json(std::string_view text);
  static HyperGrid load(const std::filesystem::path& path);
  std::string to_json() const;
  void validate() const;
};

class TrainedClassifier {
 public:
  using Model = std::variant<LogisticModel, BoostedTreesModel>;

  TrainedClassifier() = default;
  TrainedClassifier(Model model, double cv_fbeta);

  const Model& model() const { return model_; }
  ModelFamily family() const;
  std::uint32_t dim() const;
  double cv_fbeta() const { return cv_fbeta_; }
  std::string describe() const;

  double predict_proba(const FeatureVector& v) const;

 private:
  Model model_;
  double cv_fbeta_ = 0.0;
};

struct SettingScore {
  ModelFamily family = ModelFamily::logistic;
  double l2 = 0.0;          // logistic only
  GbtSetting gbt;           // boosted trees only
  std::vector<double> fold_fbeta;
  double mean_fbeta = 0.0;

  std::string describe() const;
};

struct GridSearchResult {
  TrainedClassifier best;
  std::vector<SettingScore> scores;  // declaration order, LR first
  std::size_t best_index = 0;
};

/// k-fold CV over every setting of both families, scored by mean F_beta at
/// threshold 0.5. The winner (highest mean; ties: LR before GBT, then grid
/// order) is refit on all of X.
/// Folds are scored on `threads` workers (0 = hardware concurrency); the
/// result does not depend on the thread count.
GridSearchResult grid_search_cv(std::span<const FeatureVector> X, std::span<const Label> y,
                                const HyperGrid& grid, std::uint64_t seed, std::size_t threads = 1);

/// CSV with one row per setting: family,params,fold scores,mean.
std::string scores_csv(const std::vector<SettingScore>& scores);

}  // namespace moje
