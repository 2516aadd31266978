#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mddra/catalog.hpp"
#include "mddra/trip.hpp"

namespace mddra::ml {

inline constexpr std::array<const char*, 3> kClassNames = {"safe", "careless", "dangerous"};

struct FeatureVector {
    std::vector<double> features;
    int label = 0;  // SeverityClass index
};

struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<FeatureVector> points;

    std::size_t size() const { return points.size(); }
    std::size_t dimension() const { return feature_names.size(); }
};

// Per-frame features: the nine normalized weight fractions, the speed
// factor, and the previous frame's aggregate severity (0 for the first
// frame). Labels come from the trip's label column when present, otherwise
// from the three-way collapse of the aggregate band.
Dataset featurize(const TripRecord& trip, const ParameterCatalog& catalog);
Dataset featurize(const TripRecord& trip, const ParameterCatalog& catalog, int window);

// Concatenates datasets with identical feature names.
Dataset concat(const Dataset& a, const Dataset& b);

enum class ModelFamily {
    Knn,
    LinearDiscriminant,
    QuadraticDiscriminant,
    GaussianNaiveBayes,
    BaggedTrees,
    SubspaceKnn,
    SubspaceDiscriminant,
};

enum class KnnMetric { Euclidean, Cosine, Minkowski3 };

struct ModelSpec {
    ModelFamily family = ModelFamily::Knn;
    std::string name = "fine_knn";  // presentation name used in reports
    std::size_t k = 1;              // neighbours (capped at the training size)
    KnnMetric metric = KnnMetric::Euclidean;
    bool weighted = false;          // inverse-distance votes
    std::size_t members = 50;       // trees / subspace learners
    std::size_t max_depth = 30;
    std::size_t min_leaf = 1;
    std::size_t subspace_dim = 0;   // 0 -> ceil(p / 2)
    bool bootstrap = true;
    std::uint64_t seed = 1;

    // fine_knn, medium_knn, coarse_knn, cosine_knn, cubic_knn, weighted_knn,
    // linear_discriminant, quadratic_discriminant, gaussian_nb, bagged_trees,
    // subspace_knn, subspace_discriminant.
    static ModelSpec named(const std::string& name);
    static std::vector<std::string> known_names();
};

struct KnnModel {
    std::size_t k = 1;
    KnnMetric metric = KnnMetric::Euclidean;
    bool weighted = false;
    std::vector<std::vector<double>> train_x;
    std::vector<int> train_y;
};

struct DiscriminantModel {
    bool quadratic = false;
    std::vector<double> log_priors;
    std::vector<std::vector<double>> means;                  // per class
    std::vector<std::vector<std::vector<double>>> inv_cov;   // per class (shared rows when linear)
    std::vector<double> log_det;                             // per class
};

struct NaiveBayesModel {
    std::vector<double> log_priors;
    std::vector<std::vector<double>> means;      // [class][feature]
    std::vector<std::vector<double>> variances;  // floored away from zero
};

struct TreeNode {
    int feature = -1;       // -1 for leaves
    double threshold = 0.0; // left: value <= threshold
    int left = -1;
    int right = -1;
    int label = -1;         // leaf majority class
};

struct TreeModel {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct ForestModel {
    std::vector<TreeModel> trees;
};

using SubspaceMember = std::variant<KnnModel, DiscriminantModel>;

struct SubspaceModel {
    std::vector<std::vector<std::size_t>> subsets;  // feature indices per member
    std::vector<SubspaceMember> members;
};

using AnyModel = std::variant<KnnModel, DiscriminantModel, NaiveBayesModel,
                              ForestModel, SubspaceModel>;

struct TrainedModel {
    ModelSpec spec;
    std::vector<std::string> feature_names;
    std::size_t class_count = 3;
    AnyModel model;
    double train_time_seconds = 0.0;
    std::optional<double> oob_accuracy;  // bagged trees with bootstrap only

    // Higher is better per class; exact meaning depends on the family.
    std::vector<double> class_scores(std::span<const double> x) const;
    // Argmax of class_scores; ties resolve to the lowest class index.
    int predict(std::span<const double> x) const;
};

TrainedModel train(const ModelSpec& spec, const Dataset& data);

// Versioned JSON document; round-trips every parameter exactly. The wall
// clock training time is a session measurement and is not persisted, so the
// same spec and data always produce the same bytes.
std::string save_model(const TrainedModel& model);
TrainedModel load_model(const std::string& json_text);

struct EvaluationReport {
    std::string model_name;
    std::vector<std::vector<std::size_t>> confusion;  // [actual][predicted]
    std::vector<double> per_class_recall;
    std::vector<double> false_discovery_rate;         // per predicted class
    double accuracy_pct = 0.0;
    double train_time_seconds = 0.0;
    double predict_per_second = 0.0;
};

EvaluationReport evaluate(const TrainedModel& model, const Dataset& test);

struct CvResult {
    std::vector<double> fold_accuracy_pct;
    double mean_accuracy_pct = 0.0;
    double std_accuracy_pct = 0.0;  // sample std across folds
};

// Deterministic stratified k-fold: per-class shuffle from the seed, dealt
// round-robin. 2 <= folds <= n.
CvResult kfold_cv(const ModelSpec& spec, const Dataset& data, std::size_t folds,
                  std::uint64_t seed);

// Ascending ranks, tied values averaged.
std::vector<double> rank_ascending(std::span<const double> values);

// Kruskal-Wallis H over value groups: joint ranking with tie correction.
double kruskal_wallis_h(const std::vector<std::vector<double>>& groups);

struct BenchEntry {
    std::string model;
    double accuracy_pct = 0.0;
    double predict_per_second = 0.0;
    double train_time_seconds = 0.0;
};

struct RankRow {
    std::string model;
    double accuracy_pct = 0.0;
    double accuracy_rank = 0.0;
    double speed_rank = 0.0;
    double train_time_rank = 0.0;
    double z_accuracy = 0.0;  // (rank - (n+1)/2) / sqrt((n^2-1)/12)
};

struct RankTable {
    std::vector<RankRow> rows;  // input order preserved
    double h_statistic = 0.0;   // H across the three metric groups
};

RankTable kruskal_wallis_ranks(const std::vector<BenchEntry>& entries);

}  // namespace mddra::ml
