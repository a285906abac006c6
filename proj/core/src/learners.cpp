#include "moje/learners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "moje/error.hpp"
#include "moje/metrics.hpp"
#include "moje/parallel.hpp"

namespace moje {
namespace {

using nlohmann::json;

template <typename T>
std::vector<T> read_list(const json& obj, const char* key, std::vector<T> fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_array()) throw InputError(fmt::format("grid field '{}' must be an array", key));
  return it->get<std::vector<T>>();
}

double fold_fbeta(std::span<const double> probs, std::span<const Label> labels, double beta) {
  const auto c = confusion(probs, labels, 0.5);
  return f_beta(c.precision(), c.recall(), beta);
}

template <typename T>
std::vector<T> gather(std::span<const T> src, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(src[i]);
  return out;
}

// (max_depth, learning_rate) groups of GBT settings; each group is fit once
// with its largest tree count and scored on prefixes.
struct GbtGroup {
  int max_depth;
  double learning_rate;
  int max_trees = 0;
  std::vector<std::size_t> members;  // indices into grid.gbt
};

std::vector<GbtGroup> group_gbt(const std::vector<GbtSetting>& settings) {
  std::vector<GbtGroup> groups;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    const auto& g = settings[s];
    auto it = std::find_if(groups.begin(), groups.end(), [&](const GbtGroup& x) {
      return x.max_depth == g.max_depth && x.learning_rate == g.learning_rate;
    });
    if (it == groups.end()) it = groups.insert(groups.end(), GbtGroup{g.max_depth, g.learning_rate, 0, {}});
    it->max_trees = std::max(it->max_trees, g.num_trees);
    it->members.push_back(s);
  }
  return groups;
}

}  // namespace

std::string_view to_string(ModelFamily family) {
  return family == ModelFamily::logistic ? "logistic" : "boosted_trees";
}

HyperGrid HyperGrid::defaults() {
  HyperGrid grid;
  grid.lr_l2 = {0.01, 0.1, 1.0, 10.0};
  for (int trees : {50, 100, 200})
    for (int depth : {3, 6})
      for (double rate : {0.1, 0.3}) grid.gbt.push_back({trees, depth, rate});
  return grid;
}

HyperGrid HyperGrid::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(fmt::format("grid config is not valid JSON: {}", e.what()));
  }
  if (!j.is_object()) throw InputError("grid config must be a JSON object");
  HyperGrid grid = defaults();
  try {
    if (auto lr = j.find("lr"); lr != j.end()) grid.lr_l2 = read_list<double>(*lr, "l2", grid.lr_l2);
    if (auto gbt = j.find("gbt"); gbt != j.end()) {
      if (gbt->is_array()) {
        // Explicit list of settings; empty disables the family.
        grid.gbt.clear();
        for (const auto& g : *gbt)
          grid.gbt.push_back({g.at("num_trees").get<int>(), g.at("max_depth").get<int>(),
                              g.at("learning_rate").get<double>()});
      } else {
        const auto trees = read_list<int>(*gbt, "num_trees", {50, 100, 200});
        const auto depths = read_list<int>(*gbt, "max_depth", {3, 6});
        const auto rates = read_list<double>(*gbt, "learning_rate", {0.1, 0.3});
        grid.gbt.clear();
        for (int t : trees)
          for (int d : depths)
            for (double r : rates) grid.gbt.push_back({t, d, r});
      }
    }
    grid.cv_folds = j.value("cv_folds", grid.cv_folds);
    grid.beta = j.value("beta", grid.beta);
    grid.lr_max_iters = j.value("lr_max_iters", grid.lr_max_iters);
    grid.lr_tol = j.value("lr_tol", grid.lr_tol);
    grid.min_child_weight = j.value("min_child_weight", grid.min_child_weight);
  } catch (const json::exception& e) {
    throw InputError(fmt::format("invalid grid config: {}", e.what()));
  }
  grid.validate();
  return grid;
}

HyperGrid HyperGrid::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open grid config '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string HyperGrid::to_json() const {
  json gbt_settings = json::array();
  for (const auto& g : gbt)
    gbt_settings.push_back({{"num_trees", g.num_trees}, {"max_depth", g.max_depth},
                            {"learning_rate", g.learning_rate}});
  json j = {{"lr", {{"l2", lr_l2}}},   {"gbt", gbt_settings},
            {"cv_folds", cv_folds},   {"beta", beta},
            {"lr_max_iters", lr_max_iters}, {"lr_tol", lr_tol},
            {"min_child_weight", min_child_weight}};
  return j.dump();
}

void HyperGrid::validate() const {
  if (lr_l2.empty() && gbt.empty()) throw InputError("hyperparameter grid is empty");
  if (cv_folds < 2) throw InputError("cv_folds must be >= 2");
  if (!(beta > 0.0)) throw InputError("beta must be positive");
  for (double l2 : lr_l2)
    if (!(l2 >= 0.0)) throw InputError("l2 values must be non-negative");
  for (const auto& g : gbt) {
    if (g.num_trees < 1 || g.max_depth < 1) throw InputError("num_trees and max_depth must be >= 1");
    if (!(g.learning_rate > 0.0 && g.learning_rate <= 1.0))
      throw InputError("learning_rate must lie in (0, 1]");
  }
}

TrainedClassifier::TrainedClassifier(Model model, double cv_fbeta)
    : model_(std::move(model)), cv_fbeta_(cv_fbeta) {}

ModelFamily TrainedClassifier::family() const {
  return std::holds_alternative<LogisticModel>(model_) ? ModelFamily::logistic
                                                       : ModelFamily::boosted_trees;
}

std::uint32_t TrainedClassifier::dim() const {
  if (auto* lr = std::get_if<LogisticModel>(&model_)) return lr->dim();
  return std::get<BoostedTreesModel>(model_).dim;
}

std::string TrainedClassifier::describe() const {
  if (auto* lr = std::get_if<LogisticModel>(&model_)) return fmt::format("logistic(l2={})", lr->l2);
  const auto& gbt = std::get<BoostedTreesModel>(model_);
  return fmt::format("boosted_trees(trees={}, depth={}, lr={})", gbt.trees.size(), gbt.max_depth,
                     gbt.learning_rate);
}

double TrainedClassifier::predict_proba(const FeatureVector& v) const {
  if (auto* lr = std::get_if<LogisticModel>(&model_)) return lr_predict_proba(*lr, v);
  return gbt_predict_proba(std::get<BoostedTreesModel>(model_), v);
}

std::string SettingScore::describe() const {
  if (family == ModelFamily::logistic) return fmt::format("logistic(l2={})", l2);
  return fmt::format("boosted_trees(trees={}, depth={}, lr={})", gbt.num_trees, gbt.max_depth,
                     gbt.learning_rate);
}

GridSearchResult grid_search_cv(std::span<const FeatureVector> X, std::span<const Label> y,
                                const HyperGrid& grid, std::uint64_t seed, std::size_t threads) {
  grid.validate();
  if (X.size() != y.size()) throw PreconditionError("feature and label counts differ");
  const auto folds = kfold_indices({y.begin(), y.end()}, grid.cv_folds, seed);
  const auto groups = group_gbt(grid.gbt);
  const std::size_t n_settings = grid.lr_l2.size() + grid.gbt.size();

  // fold_scores[fold][setting]; NaN marks a failed fit.
  const double failed = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> fold_scores(folds.size(), std::vector<double>(n_settings, failed));
  std::vector<std::exception_ptr> first_error(folds.size());

  parallel_for(folds.size(), threads, [&](std::size_t f) {
    const auto X_tr = gather(X, folds[f].train);
    const auto y_tr = gather(y, folds[f].train);
    const auto X_va = gather(X, folds[f].val);
    const auto y_va = gather(y, folds[f].val);
    auto note_error = [&] {
      if (!first_error[f]) first_error[f] = std::current_exception();
    };
    std::vector<double> probs(X_va.size());

    for (std::size_t s = 0; s < grid.lr_l2.size(); ++s) {
      try {
        const auto model = lr_fit(X_tr, y_tr, {grid.lr_l2[s], grid.lr_max_iters, grid.lr_tol});
        for (std::size_t i = 0; i < X_va.size(); ++i) probs[i] = lr_predict_proba(model, X_va[i]);
        fold_scores[f][s] = fold_fbeta(probs, y_va, grid.beta);
      } catch (const Error&) {
        note_error();
      }
    }
    for (const auto& group : groups) {
      try {
        const auto model = gbt_fit(X_tr, y_tr,
                                   {group.max_trees, group.max_depth, group.learning_rate,
                                    grid.min_child_weight});
        // Partial sums per validation row at every member's tree count.
        for (auto member : group.members) {
          const auto trees = static_cast<std::size_t>(grid.gbt[member].num_trees);
          for (std::size_t i = 0; i < X_va.size(); ++i) {
            double sum = 0.0;
            for (std::size_t t = 0; t < trees; ++t) sum += model.trees[t].evaluate(X_va[i]);
            probs[i] = sigmoid(model.base_score + model.learning_rate * sum);
          }
          fold_scores[f][grid.lr_l2.size() + member] = fold_fbeta(probs, y_va, grid.beta);
        }
      } catch (const Error&) {
        note_error();
      }
    }
  });

  GridSearchResult result;
  result.scores.resize(n_settings);
  std::optional<std::size_t> best;
  for (std::size_t s = 0; s < n_settings; ++s) {
    auto& sc = result.scores[s];
    if (s < grid.lr_l2.size()) {
      sc.family = ModelFamily::logistic;
      sc.l2 = grid.lr_l2[s];
    } else {
      sc.family = ModelFamily::boosted_trees;
      sc.gbt = grid.gbt[s - grid.lr_l2.size()];
    }
    double total = 0.0;
    bool ok = true;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      sc.fold_fbeta.push_back(fold_scores[f][s]);
      ok = ok && !std::isnan(fold_scores[f][s]);
      total += fold_scores[f][s];
    }
    sc.mean_fbeta = ok ? total / static_cast<double>(folds.size()) : failed;
    if (ok && (!best || sc.mean_fbeta > result.scores[*best].mean_fbeta)) best = s;
  }
  if (!best) {
    for (auto& e : first_error)
      if (e) std::rethrow_exception(e);
    throw PreconditionError("no hyperparameter setting could be trained");
  }

  result.best_index = *best;
  const auto& win = result.scores[*best];
  if (win.family == ModelFamily::logistic) {
    result.best = TrainedClassifier(lr_fit(X, y, {win.l2, grid.lr_max_iters, grid.lr_tol}),
                                    win.mean_fbeta);
  } else {
    result.best = TrainedClassifier(
        gbt_fit(X, y,
                {win.gbt.num_trees, win.gbt.max_depth, win.gbt.learning_rate, grid.min_child_weight}),
        win.mean_fbeta);
  }
  return result;
}

std::string scores_csv(const std::vector<SettingScore>& scores) {
  std::string out = "family,l2,num_trees,max_depth,learning_rate,mean_fbeta";
  const std::size_t folds = scores.empty() ? 0 : scores.front().fold_fbeta.size();
  for (std::size_t f = 0; f < folds; ++f) out += fmt::format(",fold{}", f);
  out += '\n';
  for (const auto& s : scores) {
    if (s.family == ModelFamily::logistic)
      out += fmt::format("logistic,{},,,,{}", s.l2, s.mean_fbeta);
    else
      out += fmt::format("boosted_trees,,{},{},{},{}", s.gbt.num_trees, s.gbt.max_depth,
                         s.gbt.learning_rate, s.mean_fbeta);
    for (double v : s.fold_fbeta) out += fmt::format(",{}", v);
    out += '\n';
  }
  return out;
}

}  // namespace moje
