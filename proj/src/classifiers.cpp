#include "mddra/classifiers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "mddra/errors.hpp"
#include "mddra/rng.hpp"
#include "mddra/severity.hpp"

namespace mddra::ml {

namespace {

using nlohmann::json;

constexpr std::size_t kClassCount = 3;

int majority_class(const std::vector<double>& votes) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c)
        if (votes[c] > votes[best]) best = c;
    return static_cast<int>(best);
}

double distance(const std::vector<double>& a, std::span<const double> b, KnnMetric metric) {
    switch (metric) {
        case KnnMetric::Euclidean: {
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = a[i] - b[i];
                s += d * d;
            }
            return std::sqrt(s);
        }
        case KnnMetric::Minkowski3: {
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = std::abs(a[i] - b[i]);
                s += d * d * d;
            }
            return std::cbrt(s);
        }
        case KnnMetric::Cosine: {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                dot += a[i] * b[i];
                na += a[i] * a[i];
                nb += b[i] * b[i];
            }
            if (na == 0.0 && nb == 0.0) return 0.0;
            if (na == 0.0 || nb == 0.0) return 1.0;
            return 1.0 - dot / std::sqrt(na * nb);
        }
    }
    throw ValidationError("unknown metric");
}

std::vector<double> knn_scores(const KnnModel& m, std::span<const double> x) {
    const std::size_t n = m.train_x.size();
    if (n == 0) throw ValidationError("KNN model has no training points");
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i)
        dist[i] = {distance(m.train_x[i], x, m.metric), i};
    // Full (distance, index) sort keeps neighbour selection deterministic.
    std::sort(dist.begin(), dist.end());
    const std::size_t k = std::min(m.k, n);

    std::vector<double> votes(kClassCount, 0.0);
    if (m.weighted) {
        bool any_zero = false;
        for (std::size_t i = 0; i < k; ++i) any_zero = any_zero || dist[i].first == 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const auto& [d, idx] = dist[i];
            if (any_zero) {
                if (d == 0.0) votes[static_cast<std::size_t>(m.train_y[idx])] += 1.0;
            } else {
                votes[static_cast<std::size_t>(m.train_y[idx])] += 1.0 / d;
            }
        }
    } else {
        for (std::size_t i = 0; i < k; ++i)
            votes[static_cast<std::size_t>(m.train_y[dist[i].second])] += 1.0;
    }
    return votes;
}

// Dense symmetric positive definite helpers for the discriminant models.
struct Cholesky {
    std::vector<double> l;  // lower triangle, row-major p x p
    std::size_t p = 0;
    double log_det = 0.0;
};

Cholesky cholesky(const std::vector<double>& m, std::size_t p) {
    Cholesky ch;
    ch.p = p;
    ch.l.assign(p * p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = m[i * p + j];
            for (std::size_t k = 0; k < j; ++k) s -= ch.l[i * p + k] * ch.l[j * p + k];
            if (i == j) {
                if (s <= 0.0)
                    throw ValidationError("covariance matrix is not positive definite");
                ch.l[i * p + i] = std::sqrt(s);
                ch.log_det += 2.0 * std::log(ch.l[i * p + i]);
            } else {
                ch.l[i * p + j] = s / ch.l[j * p + j];
            }
        }
    }
    return ch;
}

std::vector<std::vector<double>> spd_inverse(const Cholesky& ch) {
    const std::size_t p = ch.p;
    std::vector<std::vector<double>> inv(p, std::vector<double>(p, 0.0));
    // Solve A x = e_c per unit vector via the two triangular systems.
    std::vector<double> y(p), x(p);
    for (std::size_t c = 0; c < p; ++c) {
        for (std::size_t i = 0; i < p; ++i) {
            double s = i == c ? 1.0 : 0.0;
            for (std::size_t k = 0; k < i; ++k) s -= ch.l[i * p + k] * y[k];
            y[i] = s / ch.l[i * p + i];
        }
        for (std::size_t ii = p; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t k = ii + 1; k < p; ++k) s -= ch.l[k * p + ii] * x[k];
            x[ii] = s / ch.l[ii * p + ii];
        }
        for (std::size_t i = 0; i < p; ++i) inv[i][c] = x[i];
    }
    return inv;
}

std::vector<double> discriminant_scores(const DiscriminantModel& m,
                                        std::span<const double> x) {
    const std::size_t classes = m.means.size();
    const std::size_t p = m.means.empty() ? 0 : m.means.front().size();
    std::vector<double> scores(classes, 0.0);
    std::vector<double> diff(p);
    for (std::size_t c = 0; c < classes; ++c) {
        const auto& w = m.inv_cov[c];
        if (m.quadratic) {
            for (std::size_t j = 0; j < p; ++j) diff[j] = x[j] - m.means[c][j];
            double quad = 0.0;
            for (std::size_t i = 0; i < p; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < p; ++j) s += w[i][j] * diff[j];
                quad += diff[i] * s;
            }
            scores[c] = -0.5 * m.log_det[c] - 0.5 * quad + m.log_priors[c];
        } else {
            // x' W mu_c - mu_c' W mu_c / 2 + log prior
            double xwm = 0.0, mwm = 0.0;
            for (std::size_t i = 0; i < p; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < p; ++j) s += w[i][j] * m.means[c][j];
                xwm += x[i] * s;
                mwm += m.means[c][i] * s;
            }
            scores[c] = xwm - 0.5 * mwm + m.log_priors[c];
        }
    }
    return scores;
}

std::vector<double> naive_bayes_scores(const NaiveBayesModel& m, std::span<const double> x) {
    const std::size_t classes = m.means.size();
    std::vector<double> scores(classes, 0.0);
    for (std::size_t c = 0; c < classes; ++c) {
        double ll = m.log_priors[c];
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double v = m.variances[c][j];
            const double d = x[j] - m.means[c][j];
            ll += -0.5 * std::log(2.0 * std::numbers::pi * v) - d * d / (2.0 * v);
        }
        scores[c] = ll;
    }
    return scores;
}

int tree_predict(const TreeModel& tree, std::span<const double> x) {
    int at = 0;
    while (true) {
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(at)];
        if (node.feature < 0) return node.label;
        at = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                         : node.right;
    }
}

std::vector<double> forest_scores(const ForestModel& m, std::span<const double> x) {
    std::vector<double> votes(kClassCount, 0.0);
    for (const auto& tree : m.trees)
        votes[static_cast<std::size_t>(tree_predict(tree, x))] += 1.0;
    return votes;
}

std::vector<double> member_scores(const SubspaceMember& member, std::span<const double> x) {
    if (std::holds_alternative<KnnModel>(member))
        return knn_scores(std::get<KnnModel>(member), x);
    return discriminant_scores(std::get<DiscriminantModel>(member), x);
}

std::vector<double> subspace_scores(const SubspaceModel& m, std::span<const double> x) {
    std::vector<double> votes(kClassCount, 0.0);
    std::vector<double> projected;
    for (std::size_t i = 0; i < m.members.size(); ++i) {
        projected.clear();
        for (std::size_t f : m.subsets[i]) projected.push_back(x[f]);
        const auto scores = member_scores(m.members[i], projected);
        votes[static_cast<std::size_t>(majority_class(scores))] += 1.0;
    }
    return votes;
}

// ---- training ----

struct ClassSplit {
    std::vector<std::vector<std::size_t>> by_class{kClassCount};
    std::vector<double> priors = std::vector<double>(kClassCount, 0.0);
};

ClassSplit split_by_class(const Dataset& data) {
    ClassSplit s;
    for (std::size_t i = 0; i < data.points.size(); ++i) {
        const int y = data.points[i].label;
        if (y < 0 || static_cast<std::size_t>(y) >= kClassCount)
            throw ValidationError("label out of range at point " + std::to_string(i));
        s.by_class[static_cast<std::size_t>(y)].push_back(i);
    }
    for (std::size_t c = 0; c < kClassCount; ++c)
        s.priors[c] = static_cast<double>(s.by_class[c].size()) /
                      static_cast<double>(data.points.size());
    return s;
}

KnnModel train_knn(const ModelSpec& spec, const Dataset& data) {
    KnnModel m;
    m.k = spec.k;
    m.metric = spec.metric;
    m.weighted = spec.weighted;
    m.train_x.reserve(data.points.size());
    m.train_y.reserve(data.points.size());
    for (const auto& pt : data.points) {
        m.train_x.push_back(pt.features);
        m.train_y.push_back(pt.label);
    }
    return m;
}

DiscriminantModel train_discriminant(const Dataset& data, bool quadratic) {
    const std::size_t p = data.dimension();
    const std::size_t n = data.points.size();
    const ClassSplit split = split_by_class(data);

    DiscriminantModel m;
    m.quadratic = quadratic;
    m.means.assign(kClassCount, std::vector<double>(p, 0.0));
    m.log_priors.assign(kClassCount, 0.0);
    for (std::size_t c = 0; c < kClassCount; ++c) {
        if (split.by_class[c].empty())
            throw ValidationError("discriminant training needs every class present");
        m.log_priors[c] = std::log(split.priors[c]);
        for (std::size_t i : split.by_class[c])
            for (std::size_t j = 0; j < p; ++j)
                m.means[c][j] += data.points[i].features[j];
        for (std::size_t j = 0; j < p; ++j)
            m.means[c][j] /= static_cast<double>(split.by_class[c].size());
    }

    const auto jittered = [p](std::vector<double> cov) {
        double trace = 0.0;
        for (std::size_t j = 0; j < p; ++j) trace += cov[j * p + j];
        const double ridge = 1e-6 * trace / static_cast<double>(p);
        for (std::size_t j = 0; j < p; ++j)
            cov[j * p + j] += std::max(ridge, 1e-12);
        return cov;
    };

    if (quadratic) {
        for (std::size_t c = 0; c < kClassCount; ++c) {
            const auto& members = split.by_class[c];
            if (members.size() < 2)
                throw ValidationError(
                    "quadratic discriminant needs at least 2 samples per class");
            std::vector<double> cov(p * p, 0.0);
            for (std::size_t i : members)
                for (std::size_t r = 0; r < p; ++r) {
                    const double dr = data.points[i].features[r] - m.means[c][r];
                    for (std::size_t s = 0; s < p; ++s)
                        cov[r * p + s] +=
                            dr * (data.points[i].features[s] - m.means[c][s]);
                }
            const double denom = static_cast<double>(members.size() - 1);
            for (double& v : cov) v /= denom;
            const Cholesky ch = cholesky(jittered(std::move(cov)), p);
            m.inv_cov.push_back(spd_inverse(ch));
            m.log_det.push_back(ch.log_det);
        }
    } else {
        if (n <= kClassCount)
            throw ValidationError("linear discriminant needs more samples than classes");
        std::vector<double> cov(p * p, 0.0);
        for (std::size_t c = 0; c < kClassCount; ++c)
            for (std::size_t i : split.by_class[c])
                for (std::size_t r = 0; r < p; ++r) {
                    const double dr = data.points[i].features[r] - m.means[c][r];
                    for (std::size_t s = 0; s < p; ++s)
                        cov[r * p + s] +=
                            dr * (data.points[i].features[s] - m.means[c][s]);
                }
        const double denom = static_cast<double>(n - kClassCount);
        for (double& v : cov) v /= denom;
        const Cholesky ch = cholesky(jittered(std::move(cov)), p);
        const auto inv = spd_inverse(ch);
        for (std::size_t c = 0; c < kClassCount; ++c) {
            m.inv_cov.push_back(inv);
            m.log_det.push_back(ch.log_det);
        }
    }
    return m;
}

NaiveBayesModel train_naive_bayes(const Dataset& data) {
    const std::size_t p = data.dimension();
    const ClassSplit split = split_by_class(data);
    NaiveBayesModel m;
    m.means.assign(kClassCount, std::vector<double>(p, 0.0));
    m.variances.assign(kClassCount, std::vector<double>(p, 0.0));
    m.log_priors.assign(kClassCount, 0.0);
    for (std::size_t c = 0; c < kClassCount; ++c) {
        const auto& members = split.by_class[c];
        if (members.size() < 2)
            throw ValidationError("naive Bayes needs at least 2 samples per class");
        m.log_priors[c] = std::log(split.priors[c]);
        for (std::size_t i : members)
            for (std::size_t j = 0; j < p; ++j)
                m.means[c][j] += data.points[i].features[j];
        for (std::size_t j = 0; j < p; ++j)
            m.means[c][j] /= static_cast<double>(members.size());
        for (std::size_t i : members)
            for (std::size_t j = 0; j < p; ++j) {
                const double d = data.points[i].features[j] - m.means[c][j];
                m.variances[c][j] += d * d;
            }
        for (std::size_t j = 0; j < p; ++j) {
            m.variances[c][j] /= static_cast<double>(members.size() - 1);
            // Constant features would otherwise zero out the density.
            m.variances[c][j] = std::max(m.variances[c][j], 1e-12);
        }
    }
    return m;
}

// ---- CART ----

double gini(const std::array<double, kClassCount>& counts, double total) {
    if (total <= 0.0) return 0.0;
    double g = 1.0;
    for (double c : counts) {
        const double f = c / total;
        g -= f * f;
    }
    return g;
}

struct TreeBuilder {
    const Dataset& data;
    std::size_t max_depth;
    std::size_t min_leaf;
    TreeModel tree;

    int build(std::vector<std::size_t>& indices, std::size_t depth) {
        std::array<double, kClassCount> counts{};
        for (std::size_t i : indices)
            counts[static_cast<std::size_t>(data.points[i].label)] += 1.0;
        const double total = static_cast<double>(indices.size());

        int majority = 0;
        for (std::size_t c = 1; c < kClassCount; ++c)
            if (counts[c] > counts[static_cast<std::size_t>(majority)])
                majority = static_cast<int>(c);

        const double node_gini = gini(counts, total);
        const bool stop = node_gini == 0.0 || depth >= max_depth ||
                          indices.size() < 2 * min_leaf;

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 0.0;
        if (!stop) {
            const std::size_t p = data.dimension();
            std::vector<std::pair<double, int>> column(indices.size());
            for (std::size_t f = 0; f < p; ++f) {
                for (std::size_t i = 0; i < indices.size(); ++i)
                    column[i] = {data.points[indices[i]].features[f],
                                 data.points[indices[i]].label};
                std::sort(column.begin(), column.end());
                std::array<double, kClassCount> left{};
                double nl = 0.0;
                for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                    left[static_cast<std::size_t>(column[i].second)] += 1.0;
                    nl += 1.0;
                    if (column[i].first == column[i + 1].first) continue;
                    if (nl < static_cast<double>(min_leaf) ||
                        total - nl < static_cast<double>(min_leaf))
                        continue;
                    std::array<double, kClassCount> right{};
                    for (std::size_t c = 0; c < kClassCount; ++c)
                        right[c] = counts[c] - left[c];
                    const double gain = node_gini -
                                        (nl / total) * gini(left, nl) -
                                        ((total - nl) / total) * gini(right, total - nl);
                    // Strict improvement keeps the lowest feature and the
                    // lowest threshold among ties.
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = static_cast<int>(f);
                        best_threshold = 0.5 * (column[i].first + column[i + 1].first);
                    }
                }
            }
        }

        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        if (best_feature < 0) {
            tree.nodes[static_cast<std::size_t>(node_id)].label = majority;
            return node_id;
        }

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i : indices) {
            if (data.points[i].features[static_cast<std::size_t>(best_feature)] <=
                best_threshold)
                left_idx.push_back(i);
            else
                right_idx.push_back(i);
        }
        const int left_id = build(left_idx, depth + 1);
        const int right_id = build(right_idx, depth + 1);
        TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = left_id;
        node.right = right_id;
        return node_id;
    }
};

TreeModel train_tree(const Dataset& data, const std::vector<std::size_t>& indices,
                     std::size_t max_depth, std::size_t min_leaf) {
    TreeBuilder builder{data, max_depth, std::max<std::size_t>(1, min_leaf), {}};
    std::vector<std::size_t> idx = indices;
    builder.build(idx, 0);
    return std::move(builder.tree);
}

struct ForestResult {
    ForestModel model;
    std::optional<double> oob_accuracy;
};

ForestResult train_forest(const ModelSpec& spec, const Dataset& data) {
    const std::size_t n = data.points.size();
    if (spec.members == 0) throw ValidationError("ensemble needs at least one member");
    ForestResult result;
    std::vector<std::vector<std::size_t>> bag_count(spec.members,
                                                    std::vector<std::size_t>(n, 0));
    for (std::size_t t = 0; t < spec.members; ++t) {
        Xoshiro256 rng(derive_seed(spec.seed, t));
        std::vector<std::size_t> indices;
        indices.reserve(n);
        if (spec.bootstrap) {
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t pick = rng.below(n);
                indices.push_back(pick);
                bag_count[t][pick] += 1;
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                indices.push_back(i);
                bag_count[t][i] = 1;
            }
        }
        result.model.trees.push_back(
            train_tree(data, indices, spec.max_depth, spec.min_leaf));
    }

    if (spec.bootstrap) {
        std::size_t covered = 0, correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> votes(kClassCount, 0.0);
            bool any = false;
            for (std::size_t t = 0; t < spec.members; ++t) {
                if (bag_count[t][i] != 0) continue;
                any = true;
                votes[static_cast<std::size_t>(
                    tree_predict(result.model.trees[t], data.points[i].features))] += 1.0;
            }
            if (!any) continue;
            ++covered;
            if (majority_class(votes) == data.points[i].label) ++correct;
        }
        if (covered > 0)
            result.oob_accuracy =
                static_cast<double>(correct) / static_cast<double>(covered);
    }
    return result;
}

SubspaceModel train_subspace(const ModelSpec& spec, const Dataset& data, bool knn_members) {
    const std::size_t p = data.dimension();
    if (spec.members == 0) throw ValidationError("ensemble needs at least one member");
    const std::size_t dim =
        spec.subspace_dim == 0 ? (p + 1) / 2 : std::min(spec.subspace_dim, p);
    if (dim == 0) throw ValidationError("subspace dimension must be >= 1");

    SubspaceModel m;
    for (std::size_t member = 0; member < spec.members; ++member) {
        Xoshiro256 rng(derive_seed(spec.seed, member));
        std::vector<std::size_t> all(p);
        std::iota(all.begin(), all.end(), std::size_t{0});
        rng.shuffle(all);
        std::vector<std::size_t> subset(all.begin(), all.begin() + static_cast<long>(dim));
        std::sort(subset.begin(), subset.end());

        Dataset projected;
        for (std::size_t f : subset)
            projected.feature_names.push_back(data.feature_names[f]);
        projected.points.reserve(data.points.size());
        for (const auto& pt : data.points) {
            FeatureVector fv;
            fv.label = pt.label;
            for (std::size_t f : subset) fv.features.push_back(pt.features[f]);
            projected.points.push_back(std::move(fv));
        }

        if (knn_members) {
            m.members.push_back(train_knn(spec, projected));
        } else {
            m.members.push_back(train_discriminant(projected, false));
        }
        m.subsets.push_back(std::move(subset));
    }
    return m;
}

}  // namespace

Dataset featurize(const TripRecord& trip, const ParameterCatalog& catalog) {
    return featurize(trip, catalog, catalog.window);
}

Dataset featurize(const TripRecord& trip, const ParameterCatalog& catalog, int window) {
    const auto assessments = assess_stream(trip, catalog, window);

    Dataset data;
    for (const char* name : kParameterNames) data.feature_names.push_back(name);
    data.feature_names.push_back("speed_factor");
    data.feature_names.push_back("prev_aggregate");

    data.points.reserve(trip.frames.size());
    for (std::size_t i = 0; i < trip.frames.size(); ++i) {
        const FrameObservation& f = trip.frames[i];
        FeatureVector fv;
        fv.features.reserve(kParameterCount + 2);
        for (std::size_t p = 0; p < kParameterCount; ++p)
            fv.features.push_back(
                normalized_term(catalog.parameter(kParameterNames[p]), f.actions[p]));
        fv.features.push_back(speed_factor(f.speed_mph, f.action(Param::RoadType), catalog));
        fv.features.push_back(i == 0 ? 0.0 : assessments[i - 1].aggregate_score);
        if (trip.has_labels())
            fv.label = static_cast<int>(severity_class_from(trip.labels[i]));
        else
            fv.label = static_cast<int>(
                collapse(assessments[i].band().distraction_class));
        data.points.push_back(std::move(fv));
    }
    return data;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.feature_names != b.feature_names)
        throw ValidationError("datasets have different feature layouts");
    Dataset out = a;
    out.points.insert(out.points.end(), b.points.begin(), b.points.end());
    return out;
}

ModelSpec ModelSpec::named(const std::string& name) {
    ModelSpec s;
    s.name = name;
    if (name == "fine_knn") {
        s.family = ModelFamily::Knn;
        s.k = 1;
    } else if (name == "medium_knn") {
        s.family = ModelFamily::Knn;
        s.k = 10;
    } else if (name == "coarse_knn") {
        s.family = ModelFamily::Knn;
        s.k = 100;
    } else if (name == "cosine_knn") {
        s.family = ModelFamily::Knn;
        s.k = 10;
        s.metric = KnnMetric::Cosine;
    } else if (name == "cubic_knn") {
        s.family = ModelFamily::Knn;
        s.k = 10;
        s.metric = KnnMetric::Minkowski3;
    } else if (name == "weighted_knn") {
        s.family = ModelFamily::Knn;
        s.k = 10;
        s.weighted = true;
    } else if (name == "linear_discriminant") {
        s.family = ModelFamily::LinearDiscriminant;
    } else if (name == "quadratic_discriminant") {
        s.family = ModelFamily::QuadraticDiscriminant;
    } else if (name == "gaussian_nb") {
        s.family = ModelFamily::GaussianNaiveBayes;
    } else if (name == "bagged_trees") {
        s.family = ModelFamily::BaggedTrees;
        s.members = 50;
    } else if (name == "subspace_knn") {
        s.family = ModelFamily::SubspaceKnn;
        s.members = 30;
        s.k = 1;
    } else if (name == "subspace_discriminant") {
        s.family = ModelFamily::SubspaceDiscriminant;
        s.members = 30;
    } else {
        throw ValidationError("unknown model name '" + name + "'");
    }
    return s;
}

std::vector<std::string> ModelSpec::known_names() {
    return {"fine_knn",      "medium_knn",          "coarse_knn",
            "cosine_knn",    "cubic_knn",           "weighted_knn",
            "linear_discriminant", "quadratic_discriminant", "gaussian_nb",
            "bagged_trees",  "subspace_knn",        "subspace_discriminant"};
}

std::vector<double> TrainedModel::class_scores(std::span<const double> x) const {
    if (x.size() != feature_names.size())
        throw ValidationError("feature vector has wrong dimension");
    return std::visit(
        [&](const auto& m) -> std::vector<double> {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, KnnModel>) return knn_scores(m, x);
            else if constexpr (std::is_same_v<T, DiscriminantModel>)
                return discriminant_scores(m, x);
            else if constexpr (std::is_same_v<T, NaiveBayesModel>)
                return naive_bayes_scores(m, x);
            else if constexpr (std::is_same_v<T, ForestModel>)
                return forest_scores(m, x);
            else
                return subspace_scores(m, x);
        },
        model);
}

int TrainedModel::predict(std::span<const double> x) const {
    return majority_class(class_scores(x));
}

TrainedModel train(const ModelSpec& spec, const Dataset& data) {
    if (data.points.empty()) throw ValidationError("training data is empty");
    for (const auto& pt : data.points)
        if (pt.features.size() != data.dimension())
            throw ValidationError("feature vector dimension mismatch in training data");
    if (spec.k == 0) throw ValidationError("k must be >= 1");

    TrainedModel model;
    model.spec = spec;
    model.feature_names = data.feature_names;
    model.class_count = kClassCount;

    const auto start = std::chrono::steady_clock::now();
    switch (spec.family) {
        case ModelFamily::Knn:
            model.model = train_knn(spec, data);
            break;
        case ModelFamily::LinearDiscriminant:
            model.model = train_discriminant(data, false);
            break;
        case ModelFamily::QuadraticDiscriminant:
            model.model = train_discriminant(data, true);
            break;
        case ModelFamily::GaussianNaiveBayes:
            model.model = train_naive_bayes(data);
            break;
        case ModelFamily::BaggedTrees: {
            ForestResult r = train_forest(spec, data);
            model.model = std::move(r.model);
            model.oob_accuracy = r.oob_accuracy;
            break;
        }
        case ModelFamily::SubspaceKnn:
            model.model = train_subspace(spec, data, true);
            break;
        case ModelFamily::SubspaceDiscriminant:
            model.model = train_subspace(spec, data, false);
            break;
    }
    const auto end = std::chrono::steady_clock::now();
    model.train_time_seconds = std::chrono::duration<double>(end - start).count();
    return model;
}

EvaluationReport evaluate(const TrainedModel& model, const Dataset& test) {
    if (test.points.empty()) throw ValidationError("evaluation data is empty");
    EvaluationReport report;
    report.model_name = model.spec.name;
    report.confusion.assign(kClassCount, std::vector<std::size_t>(kClassCount, 0));

    const auto start = std::chrono::steady_clock::now();
    for (const auto& pt : test.points) {
        const int predicted = model.predict(pt.features);
        if (pt.label < 0 || static_cast<std::size_t>(pt.label) >= kClassCount)
            throw ValidationError("evaluation label out of range");
        report.confusion[static_cast<std::size_t>(pt.label)]
                        [static_cast<std::size_t>(predicted)] += 1;
    }
    const auto end = std::chrono::steady_clock::now();
    const double elapsed =
        std::max(std::chrono::duration<double>(end - start).count(), 1e-9);

    std::size_t correct = 0;
    for (std::size_t c = 0; c < kClassCount; ++c) correct += report.confusion[c][c];
    report.accuracy_pct = 100.0 * static_cast<double>(correct) /
                          static_cast<double>(test.points.size());
    for (std::size_t c = 0; c < kClassCount; ++c) {
        std::size_t row = 0, col = 0;
        for (std::size_t o = 0; o < kClassCount; ++o) {
            row += report.confusion[c][o];
            col += report.confusion[o][c];
        }
        report.per_class_recall.push_back(
            row == 0 ? 0.0
                     : static_cast<double>(report.confusion[c][c]) /
                           static_cast<double>(row));
        report.false_discovery_rate.push_back(
            col == 0 ? 0.0
                     : static_cast<double>(col - report.confusion[c][c]) /
                           static_cast<double>(col));
    }
    report.train_time_seconds = model.train_time_seconds;
    report.predict_per_second = static_cast<double>(test.points.size()) / elapsed;
    return report;
}

CvResult kfold_cv(const ModelSpec& spec, const Dataset& data, std::size_t folds,
                  std::uint64_t seed) {
    const std::size_t n = data.points.size();
    if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
    if (folds > n) throw ValidationError("more folds than data points");

    // Stratified: shuffle within class, deal round-robin with a global
    // position counter so fold sizes differ by at most one.
    std::vector<std::size_t> fold_of(n, 0);
    Xoshiro256 rng(seed);
    std::size_t position = 0;
    for (std::size_t c = 0; c < kClassCount; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i)
            if (static_cast<std::size_t>(data.points[i].label) == c) members.push_back(i);
        rng.shuffle(members);
        for (std::size_t i : members) fold_of[i] = position++ % folds;
    }

    CvResult result;
    for (std::size_t f = 0; f < folds; ++f) {
        Dataset train_set, test_set;
        train_set.feature_names = data.feature_names;
        test_set.feature_names = data.feature_names;
        for (std::size_t i = 0; i < n; ++i) {
            if (fold_of[i] == f)
                test_set.points.push_back(data.points[i]);
            else
                train_set.points.push_back(data.points[i]);
        }
        ModelSpec fold_spec = spec;
        fold_spec.seed = derive_seed(seed, 1000 + f);
        const TrainedModel model = train(fold_spec, train_set);
        result.fold_accuracy_pct.push_back(evaluate(model, test_set).accuracy_pct);
    }

    double sum = 0.0;
    for (double a : result.fold_accuracy_pct) sum += a;
    result.mean_accuracy_pct = sum / static_cast<double>(folds);
    double ss = 0.0;
    for (double a : result.fold_accuracy_pct) {
        const double d = a - result.mean_accuracy_pct;
        ss += d * d;
    }
    result.std_accuracy_pct = std::sqrt(ss / static_cast<double>(folds - 1));
    return result;
}

std::vector<double> rank_ascending(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double kruskal_wallis_h(const std::vector<std::vector<double>>& groups) {
    std::vector<double> pooled;
    std::vector<std::size_t> group_of;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].empty()) throw ValidationError("empty group");
        for (double v : groups[g]) {
            pooled.push_back(v);
            group_of.push_back(g);
        }
    }
    const std::size_t n = pooled.size();
    if (n < 2 || groups.size() < 2)
        throw ValidationError("H statistic needs at least two groups of data");
    const std::vector<double> ranks = rank_ascending(pooled);

    std::vector<double> rank_sum(groups.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) rank_sum[group_of[i]] += ranks[i];

    const double dn = static_cast<double>(n);
    double h = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g)
        h += rank_sum[g] * rank_sum[g] / static_cast<double>(groups[g].size());
    h = 12.0 / (dn * (dn + 1.0)) * h - 3.0 * (dn + 1.0);

    // Tie correction over pooled rank runs.
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    const double correction = 1.0 - tie_sum / (dn * dn * dn - dn);
    if (correction > 0.0) h /= correction;
    return h;
}

RankTable kruskal_wallis_ranks(const std::vector<BenchEntry>& entries) {
    if (entries.size() < 2) throw ValidationError("ranking needs at least two entries");
    const std::size_t n = entries.size();
    std::vector<double> acc(n), speed(n), ttime(n);
    for (std::size_t i = 0; i < n; ++i) {
        acc[i] = entries[i].accuracy_pct;
        speed[i] = entries[i].predict_per_second;
        ttime[i] = entries[i].train_time_seconds;
    }
    const auto acc_rank = rank_ascending(acc);
    const auto speed_rank = rank_ascending(speed);
    const auto ttime_rank = rank_ascending(ttime);

    const double dn = static_cast<double>(n);
    const double mean_rank = (dn + 1.0) / 2.0;
    const double sd_rank = std::sqrt((dn * dn - 1.0) / 12.0);

    RankTable table;
    for (std::size_t i = 0; i < n; ++i) {
        table.rows.push_back({entries[i].model, entries[i].accuracy_pct, acc_rank[i],
                              speed_rank[i], ttime_rank[i],
                              (acc_rank[i] - mean_rank) / sd_rank});
    }
    table.h_statistic = kruskal_wallis_h({acc, speed, ttime});
    return table;
}

// ---- persistence ----

namespace {

json knn_json(const KnnModel& m) {
    return {{"type", "knn"},
            {"k", m.k},
            {"metric", static_cast<int>(m.metric)},
            {"weighted", m.weighted},
            {"train_x", m.train_x},
            {"train_y", m.train_y}};
}

KnnModel knn_from_json(const json& doc) {
    KnnModel m;
    m.k = doc.at("k").get<std::size_t>();
    m.metric = static_cast<KnnMetric>(doc.at("metric").get<int>());
    m.weighted = doc.at("weighted").get<bool>();
    m.train_x = doc.at("train_x").get<std::vector<std::vector<double>>>();
    m.train_y = doc.at("train_y").get<std::vector<int>>();
    return m;
}

json discriminant_json(const DiscriminantModel& m) {
    return {{"type", "discriminant"}, {"quadratic", m.quadratic},
            {"log_priors", m.log_priors}, {"means", m.means},
            {"inv_cov", m.inv_cov},      {"log_det", m.log_det}};
}

DiscriminantModel discriminant_from_json(const json& doc) {
    DiscriminantModel m;
    m.quadratic = doc.at("quadratic").get<bool>();
    m.log_priors = doc.at("log_priors").get<std::vector<double>>();
    m.means = doc.at("means").get<std::vector<std::vector<double>>>();
    m.inv_cov = doc.at("inv_cov").get<std::vector<std::vector<std::vector<double>>>>();
    m.log_det = doc.at("log_det").get<std::vector<double>>();
    return m;
}

json model_payload_impl(const AnyModel& any) {
    return std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, KnnModel>) {
                return knn_json(m);
            } else if constexpr (std::is_same_v<T, DiscriminantModel>) {
                return discriminant_json(m);
            } else if constexpr (std::is_same_v<T, NaiveBayesModel>) {
                return {{"type", "naive_bayes"},
                        {"log_priors", m.log_priors},
                        {"means", m.means},
                        {"variances", m.variances}};
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                json trees = json::array();
                for (const auto& tree : m.trees) {
                    json nodes = json::array();
                    for (const auto& node : tree.nodes)
                        nodes.push_back({{"feature", node.feature},
                                         {"threshold", node.threshold},
                                         {"left", node.left},
                                         {"right", node.right},
                                         {"label", node.label}});
                    trees.push_back(nodes);
                }
                return {{"type", "forest"}, {"trees", trees}};
            } else {
                json members = json::array();
                for (const auto& member : m.members) {
                    if (std::holds_alternative<KnnModel>(member))
                        members.push_back(knn_json(std::get<KnnModel>(member)));
                    else
                        members.push_back(
                            discriminant_json(std::get<DiscriminantModel>(member)));
                }
                return {{"type", "subspace"}, {"subsets", m.subsets}, {"members", members}};
            }
        },
        any);
}

AnyModel payload_model_impl(const json& doc) {
    const std::string type = doc.at("type").get<std::string>();
    if (type == "knn") return knn_from_json(doc);
    if (type == "discriminant") return discriminant_from_json(doc);
    if (type == "naive_bayes") {
        NaiveBayesModel m;
        m.log_priors = doc.at("log_priors").get<std::vector<double>>();
        m.means = doc.at("means").get<std::vector<std::vector<double>>>();
        m.variances = doc.at("variances").get<std::vector<std::vector<double>>>();
        return m;
    }
    if (type == "forest") {
        ForestModel m;
        for (const auto& tree_doc : doc.at("trees")) {
            TreeModel tree;
            for (const auto& node_doc : tree_doc) {
                TreeNode node;
                node.feature = node_doc.at("feature").get<int>();
                node.threshold = node_doc.at("threshold").get<double>();
                node.left = node_doc.at("left").get<int>();
                node.right = node_doc.at("right").get<int>();
                node.label = node_doc.at("label").get<int>();
                tree.nodes.push_back(node);
            }
            m.trees.push_back(std::move(tree));
        }
        return m;
    }
    if (type == "subspace") {
        SubspaceModel m;
        m.subsets = doc.at("subsets").get<std::vector<std::vector<std::size_t>>>();
        for (const auto& member_doc : doc.at("members")) {
            if (member_doc.at("type").get<std::string>() == "knn")
                m.members.push_back(knn_from_json(member_doc));
            else
                m.members.push_back(discriminant_from_json(member_doc));
        }
        return m;
    }
    throw ValidationError("unknown model payload type '" + type + "'");
}

const char* family_name(ModelFamily f) {
    switch (f) {
        case ModelFamily::Knn: return "knn";
        case ModelFamily::LinearDiscriminant: return "linear_discriminant";
        case ModelFamily::QuadraticDiscriminant: return "quadratic_discriminant";
        case ModelFamily::GaussianNaiveBayes: return "gaussian_nb";
        case ModelFamily::BaggedTrees: return "bagged_trees";
        case ModelFamily::SubspaceKnn: return "subspace_knn";
        case ModelFamily::SubspaceDiscriminant: return "subspace_discriminant";
    }
    return "?";
}

ModelFamily family_from(const std::string& name) {
    if (name == "knn") return ModelFamily::Knn;
    if (name == "linear_discriminant") return ModelFamily::LinearDiscriminant;
    if (name == "quadratic_discriminant") return ModelFamily::QuadraticDiscriminant;
    if (name == "gaussian_nb") return ModelFamily::GaussianNaiveBayes;
    if (name == "bagged_trees") return ModelFamily::BaggedTrees;
    if (name == "subspace_knn") return ModelFamily::SubspaceKnn;
    if (name == "subspace_discriminant") return ModelFamily::SubspaceDiscriminant;
    throw ValidationError("unknown model family '" + name + "'");
}

}  // namespace

std::string save_model(const TrainedModel& model) {
    json doc;
    doc["version"] = 1;
    doc["spec"] = {{"family", family_name(model.spec.family)},
                   {"name", model.spec.name},
                   {"k", model.spec.k},
                   {"metric", static_cast<int>(model.spec.metric)},
                   {"weighted", model.spec.weighted},
                   {"members", model.spec.members},
                   {"max_depth", model.spec.max_depth},
                   {"min_leaf", model.spec.min_leaf},
                   {"subspace_dim", model.spec.subspace_dim},
                   {"bootstrap", model.spec.bootstrap},
                   {"seed", model.spec.seed}};
    doc["feature_names"] = model.feature_names;
    doc["class_count"] = model.class_count;
    if (model.oob_accuracy)
        doc["oob_accuracy"] = *model.oob_accuracy;
    else
        doc["oob_accuracy"] = nullptr;
    doc["model"] = model_payload_impl(model.model);
    return doc.dump(2) + "\n";
}

TrainedModel load_model(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed model document: ") + e.what());
    }
    try {
        if (doc.value("version", 0) != 1)
            throw ValidationError("unsupported model document version");
        TrainedModel model;
        const json& spec = doc.at("spec");
        model.spec.family = family_from(spec.at("family").get<std::string>());
        model.spec.name = spec.at("name").get<std::string>();
        model.spec.k = spec.at("k").get<std::size_t>();
        model.spec.metric = static_cast<KnnMetric>(spec.at("metric").get<int>());
        model.spec.weighted = spec.at("weighted").get<bool>();
        model.spec.members = spec.at("members").get<std::size_t>();
        model.spec.max_depth = spec.at("max_depth").get<std::size_t>();
        model.spec.min_leaf = spec.at("min_leaf").get<std::size_t>();
        model.spec.subspace_dim = spec.at("subspace_dim").get<std::size_t>();
        model.spec.bootstrap = spec.at("bootstrap").get<bool>();
        model.spec.seed = spec.at("seed").get<std::uint64_t>();
        model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
        model.class_count = doc.at("class_count").get<std::size_t>();
        if (!doc.at("oob_accuracy").is_null())
            model.oob_accuracy = doc.at("oob_accuracy").get<double>();
        model.model = payload_model_impl(doc.at("model"));
        return model;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid model document: ") + e.what());
    }
}

}  // namespace mddra::ml
