// Command line front end: generate, score, segment, fit-dbn, filter, train,
// evaluate, cv, rank, validate, stats. Exit codes: 0 success, 1 input or
// validation problem, 2 internal failure.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mddra/catalog.hpp"
#include "mddra/classifiers.hpp"
#include "mddra/dbn.hpp"
#include "mddra/errors.hpp"
#include "mddra/generator.hpp"
#include "mddra/segmentation.hpp"
#include "mddra/severity.hpp"
#include "mddra/stats.hpp"
#include "mddra/trip_io.hpp"

namespace {

using nlohmann::json;
using namespace mddra;

std::string shortest(double v) {
    std::array<char, 32> buf;
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), r.ptr);
}

std::string fixed(double v, int precision) {
    std::array<char, 64> buf;
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                 std::chars_format::fixed, precision);
    return std::string(buf.data(), r.ptr);
}

// ---- generic CSV tables (rank/segment/stats inputs) ----

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

CsvTable read_csv_table(const std::string& path) {
    const std::string text = io::read_file(path);
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    bool have_header = false;
    std::size_t row_number = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!have_header && line.front() == '#') continue;
        auto fields = split_fields(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        ++row_number;
        if (fields.size() != table.header.size())
            throw ValidationError(path + ": row " + std::to_string(row_number) +
                                  " has " + std::to_string(fields.size()) +
                                  " fields, expected " +
                                  std::to_string(table.header.size()));
        table.rows.push_back(std::move(fields));
    }
    if (!have_header) throw ValidationError(path + ": no header row");
    return table;
}

std::size_t column_of(const CsvTable& table, const std::string& name,
                      const std::string& path) {
    for (std::size_t i = 0; i < table.header.size(); ++i)
        if (table.header[i] == name) return i;
    throw ValidationError(path + ": no column named '" + name + "'");
}

double cell_double(const std::string& cell, std::size_t row, const std::string& column) {
    double v = 0.0;
    const char* end = cell.data() + cell.size();
    const auto r = std::from_chars(cell.data(), end, v);
    if (r.ec != std::errc{} || r.ptr != end || !std::isfinite(v))
        throw ValidationError("row " + std::to_string(row + 1) + ", column " + column +
                              ": not a finite number: '" + cell + "'");
    return v;
}

std::vector<double> column_values(const CsvTable& table, std::size_t col,
                                  const std::string& name) {
    std::vector<double> values;
    values.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        values.push_back(cell_double(table.rows[r][col], r, name));
    return values;
}

// ---- shared option plumbing ----

struct Common {
    std::string config_path;
    int window = 0;  // 0 keeps the catalog's window

    void attach(CLI::App* sub) {
        sub->add_option("--config", config_path,
                        "Parameter catalog JSON (default: built-in catalog)")
            ->envname("MDDRA_CONFIG")
            ->check(CLI::ExistingFile);
        sub->add_option("--window", window, "Aggregation window override")
            ->check(CLI::Range(1, 1000000));
    }

    ParameterCatalog catalog() const {
        ParameterCatalog c =
            config_path.empty() ? default_catalog() : load_catalog_file(config_path);
        if (window > 0) c.window = window;
        return c;
    }
};

// Manifest next to the primary output: command, config hash, input and
// output paths, seed. No timestamps, so repeated runs are byte-identical.
void finish(const std::string& command, const std::vector<std::string>& inputs,
            const std::vector<std::string>& outputs, const ParameterCatalog& catalog,
            std::optional<std::uint64_t> seed, const json& extra = json::object()) {
    const std::string hash = io::fnv1a_hex(save_catalog(catalog));
    json doc;
    doc["command"] = command;
    doc["config_hash"] = hash;
    doc["inputs"] = inputs;
    doc["outputs"] = outputs;
    doc["seed"] = seed ? json(*seed) : json(nullptr);
    for (const auto& [key, value] : extra.items()) doc[key] = value;
    io::atomic_write(outputs.front() + ".manifest.json", doc.dump(2) + "\n");
    std::cerr << "mddra " << command << ": config=" << hash;
    if (seed) std::cerr << " seed=" << *seed;
    std::cerr << "\n";
}

struct ModelOptions {
    std::string model;
    std::size_t k = 0;
    std::size_t trees = 0;
    std::size_t depth = 0;
    std::size_t min_leaf = 0;
    std::size_t subspace_dim = 0;
    std::string metric;
    bool weighted = false;
    bool no_bootstrap = false;
    std::uint64_t seed = 1;
    CLI::App* sub = nullptr;

    void attach(CLI::App* s) {
        sub = s;
        s->add_option("--model", model, "Model preset name")
            ->required()
            ->check(CLI::IsMember(ml::ModelSpec::known_names()));
        s->add_option("--k", k, "Neighbour count")->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));
        s->add_option("--trees", trees, "Ensemble member count")
            ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
        s->add_option("--depth", depth, "Tree depth limit");
        s->add_option("--min-leaf", min_leaf, "Minimum samples per leaf")
            ->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));
        s->add_option("--subspace-dim", subspace_dim, "Features per subspace member");
        s->add_option("--metric", metric, "KNN distance")
            ->check(CLI::IsMember({"euclidean", "cosine", "minkowski3"}));
        s->add_flag("--weighted", weighted, "Inverse-distance neighbour votes");
        s->add_flag("--no-bootstrap", no_bootstrap,
                    "Train every ensemble member on the full set");
        s->add_option("--seed", seed, "Training seed");
    }

    ml::ModelSpec build() const {
        ml::ModelSpec spec = ml::ModelSpec::named(model);
        if (sub->count("--k") > 0) spec.k = k;
        if (sub->count("--trees") > 0) spec.members = trees;
        if (sub->count("--depth") > 0) spec.max_depth = depth;
        if (sub->count("--min-leaf") > 0) spec.min_leaf = min_leaf;
        if (sub->count("--subspace-dim") > 0) spec.subspace_dim = subspace_dim;
        if (sub->count("--metric") > 0) {
            if (metric == "euclidean") spec.metric = ml::KnnMetric::Euclidean;
            else if (metric == "cosine") spec.metric = ml::KnnMetric::Cosine;
            else spec.metric = ml::KnnMetric::Minkowski3;
        }
        if (weighted) spec.weighted = true;
        if (no_bootstrap) spec.bootstrap = false;
        if (sub->count("--seed") > 0) spec.seed = seed;
        return spec;
    }
};

ml::Dataset load_dataset(const std::vector<std::string>& paths,
                         const ParameterCatalog& catalog) {
    ml::Dataset data;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        TripRecord trip = io::read_trip_file(paths[i]);
        trip.validate(catalog);
        ml::Dataset part = ml::featurize(trip, catalog);
        data = i == 0 ? std::move(part) : ml::concat(data, part);
    }
    return data;
}

json describe_json(const stats::Descriptive& d) {
    json j;
    j["count"] = d.count;
    j["mean"] = d.mean;
    j["standard_error"] = d.standard_error;
    j["median"] = d.median;
    j["standard_deviation"] = d.standard_deviation;
    j["sample_variance"] = d.sample_variance;
    j["skewness"] = d.skewness ? json(*d.skewness) : json(nullptr);
    j["kurtosis"] = d.kurtosis ? json(*d.kurtosis) : json(nullptr);
    j["excess_kurtosis"] = d.excess_kurtosis ? json(*d.excess_kurtosis) : json(nullptr);
    j["minimum"] = d.min;
    j["maximum"] = d.max;
    j["range"] = d.range;
    j["sum"] = d.sum;
    j["confidence_95"] = d.confidence_95;
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Driver distraction severity scoring, filtering and classification"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "mddra 1.0");

    // generate ------------------------------------------------------------
    auto* gen_cmd = app.add_subcommand("generate", "Generate a synthetic trip CSV");
    Common gen_common;
    gen_common.attach(gen_cmd);
    std::string gen_preset, gen_scenario, gen_output, gen_trip_id, gen_labels;
    std::size_t gen_frames = 0;
    std::uint64_t gen_seed = 0;
    gen_cmd->add_option("--preset", gen_preset, "Built-in scenario")
        ->check(CLI::IsMember(gen::preset_names()));
    gen_cmd->add_option("--scenario", gen_scenario, "Scenario JSON file")
        ->check(CLI::ExistingFile);
    gen_cmd->add_option("--frames", gen_frames, "Frame count override")
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
    gen_cmd->add_option("--seed", gen_seed, "Seed override");
    gen_cmd->add_option("--trip-id", gen_trip_id, "Trip identifier override");
    gen_cmd->add_option("--labels", gen_labels, "Label column mode")
        ->check(CLI::IsMember({"none", "derived"}));
    gen_cmd->add_option("-o,--output", gen_output, "Trip CSV path")->required();
    gen_cmd->callback([&] {
        if ((gen_cmd->count("--preset") > 0) == (gen_cmd->count("--scenario") > 0))
            throw ValidationError("generate needs exactly one of --preset or --scenario");
        gen::ScenarioConfig config = gen_cmd->count("--preset") > 0
                                         ? gen::preset(gen_preset)
                                         : gen::load_scenario(io::read_file(gen_scenario));
        if (gen_cmd->count("--frames") > 0) config.frame_count = gen_frames;
        if (gen_cmd->count("--seed") > 0) config.seed = gen_seed;
        if (gen_cmd->count("--trip-id") > 0) config.trip_id = gen_trip_id;
        if (gen_cmd->count("--labels") > 0)
            config.label_mode =
                gen_labels == "derived" ? gen::LabelMode::Derived : gen::LabelMode::None;
        const ParameterCatalog catalog = gen_common.catalog();
        const TripRecord trip = gen::generate(config, catalog);
        io::write_trip_file(trip, gen_output);
        std::vector<std::string> inputs;
        if (!gen_scenario.empty()) inputs.push_back(gen_scenario);
        finish("generate", inputs, {gen_output}, catalog, config.seed);
    });

    // score ---------------------------------------------------------------
    auto* score_cmd = app.add_subcommand("score", "Per-frame severity assessment");
    Common score_common;
    score_common.attach(score_cmd);
    std::string score_input, score_output, score_series, score_format = "csv";
    score_cmd->add_option("input", score_input, "Trip CSV")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("-o,--output", score_output, "Report path")->required();
    score_cmd->add_option("--format", score_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    score_cmd->add_option("--series", score_series, "Long-format frame,variable,value CSV");
    score_cmd->callback([&] {
        const ParameterCatalog catalog = score_common.catalog();
        TripRecord trip = io::read_trip_file(score_input);
        trip.validate(catalog);
        const auto rows = assess_stream(trip, catalog);
        if (score_format == "csv") {
            io::atomic_write(score_output, io::serialize_assessments(rows));
        } else {
            json doc;
            doc["trip_id"] = trip.metadata.trip_id;
            json frames = json::array();
            for (const auto& r : rows)
                frames.push_back({{"frame", r.frame},
                                  {"frame_score", r.frame_score},
                                  {"aggregate_score", r.aggregate_score},
                                  {"band", r.band().color},
                                  {"impact", r.band().impact},
                                  {"rank", r.rank},
                                  {"likelihood", r.likelihood},
                                  {"risk_value", r.risk_value},
                                  {"takeover", r.takeover}});
            doc["frames"] = frames;
            io::atomic_write(score_output, doc.dump(2) + "\n");
        }
        std::vector<std::string> outputs = {score_output};
        if (!score_series.empty()) {
            std::string text = "frame,variable,value\n";
            for (const auto& r : rows) {
                const std::string f = std::to_string(r.frame);
                text += f + ",frame_score," + fixed(r.frame_score, 6) + "\n";
                text += f + ",aggregate_score," + fixed(r.aggregate_score, 6) + "\n";
                text += f + ",rank," + std::to_string(r.rank) + "\n";
                text += f + ",likelihood," + std::to_string(r.likelihood) + "\n";
                text += f + ",risk_value," + std::to_string(r.risk_value) + "\n";
                text += f + ",takeover," + (r.takeover ? std::string("1") : std::string("0")) + "\n";
            }
            io::atomic_write(score_series, text);
            outputs.push_back(score_series);
        }
        finish("score", {score_input}, outputs, catalog, trip.metadata.seed);
    });

    // segment ---------------------------------------------------------------
    auto* seg_cmd = app.add_subcommand("segment", "Optimal banding of a score column");
    Common seg_common;
    seg_common.attach(seg_cmd);
    std::string seg_input, seg_output, seg_column;
    std::size_t seg_k = 7;
    seg_cmd->add_option("input", seg_input, "CSV with the score column")
        ->required()
        ->check(CLI::ExistingFile);
    seg_cmd->add_option("--k", seg_k, "Segment count")
        ->check(CLI::Range(std::size_t{1}, std::size_t{10000}));
    seg_cmd->add_option("--column", seg_column,
                        "Column name (default: aggregate_score, then value)");
    seg_cmd->add_option("-o,--output", seg_output, "Result JSON path")->required();
    seg_cmd->callback([&] {
        const ParameterCatalog catalog = seg_common.catalog();
        const CsvTable table = read_csv_table(seg_input);
        std::string column = seg_column;
        if (column.empty()) {
            for (const auto& candidate : {"aggregate_score", "value"}) {
                for (const auto& h : table.header)
                    if (h == candidate) column = candidate;
                if (!column.empty()) break;
            }
            if (column.empty())
                throw ValidationError(seg_input +
                                      ": no aggregate_score or value column; use --column");
        }
        std::vector<double> values =
            column_values(table, column_of(table, column, seg_input), column);
        std::sort(values.begin(), values.end());
        const seg::Partition part = seg::optimal_partition(values, seg_k);
        json doc;
        doc["k"] = seg_k;
        doc["count"] = values.size();
        doc["loss"] = part.loss;
        doc["boundaries"] = part.boundaries;
        json boundary_values = json::array();
        for (std::size_t b : part.boundaries) boundary_values.push_back(values[b]);
        doc["boundary_values"] = boundary_values;
        json thresholds = json::array();
        for (std::size_t i = 1; i < part.boundaries.size(); ++i) {
            const std::size_t b = part.boundaries[i];
            thresholds.push_back(0.5 * (values[b - 1] + values[b]));
        }
        doc["thresholds"] = thresholds;
        io::atomic_write(seg_output, doc.dump(2) + "\n");
        finish("segment", {seg_input}, {seg_output}, catalog, std::nullopt);
    });

    // fit-dbn ---------------------------------------------------------------
    auto* fit_cmd = app.add_subcommand("fit-dbn", "Estimate filter tables from trips");
    Common fit_common;
    fit_common.attach(fit_cmd);
    std::vector<std::string> fit_inputs;
    std::string fit_output;
    int fit_states = 3;
    double fit_alpha = 1.0;
    fit_cmd->add_option("-i,--input", fit_inputs, "Trip CSV (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    fit_cmd->add_option("--states", fit_states, "3 (classes) or 7 (bands)")
        ->check(CLI::IsMember({3, 7}));
    fit_cmd->add_option("--alpha", fit_alpha, "Additive smoothing")
        ->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("-o,--output", fit_output, "Tables JSON path")->required();
    fit_cmd->callback([&] {
        const ParameterCatalog catalog = fit_common.catalog();
        const dbn::FrameDiscretizer disc(catalog);
        std::vector<dbn::LabeledSequence> sequences;
        for (const auto& path : fit_inputs) {
            TripRecord trip = io::read_trip_file(path);
            trip.validate(catalog);
            dbn::LabeledSequence seq;
            seq.observations = disc.discretize(trip);
            if (fit_states == 3 && trip.has_labels()) {
                for (const auto& label : trip.labels)
                    seq.states.push_back(
                        static_cast<std::size_t>(severity_class_from(label)));
            } else {
                const auto rows = assess_stream(trip, catalog);
                for (const auto& r : rows)
                    seq.states.push_back(
                        fit_states == 3
                            ? static_cast<std::size_t>(
                                  collapse(r.band().distraction_class))
                            : static_cast<std::size_t>(r.rank - 1));
            }
            sequences.push_back(std::move(seq));
        }
        const auto names =
            fit_states == 3 ? dbn::three_state_names() : dbn::seven_state_names();
        const dbn::CptSet cpts =
            dbn::estimate_cpts(sequences, names, disc.families(), fit_alpha);
        io::atomic_write(fit_output, dbn::save_cpts(cpts));
        finish("fit-dbn", fit_inputs, {fit_output}, catalog, std::nullopt,
               {{"states", fit_states}, {"alpha", fit_alpha}});
    });

    // filter ----------------------------------------------------------------
    auto* filter_cmd = app.add_subcommand("filter", "Posterior state beliefs per frame");
    Common filter_common;
    filter_common.attach(filter_cmd);
    std::string filter_input, filter_cpts, filter_output, filter_format = "csv";
    filter_cmd->add_option("input", filter_input, "Trip CSV")
        ->required()
        ->check(CLI::ExistingFile);
    filter_cmd->add_option("--cpts", filter_cpts, "Tables JSON from fit-dbn")
        ->required()
        ->check(CLI::ExistingFile);
    filter_cmd->add_option("-o,--output", filter_output, "Beliefs path")->required();
    filter_cmd->add_option("--format", filter_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    filter_cmd->callback([&] {
        const ParameterCatalog catalog = filter_common.catalog();
        TripRecord trip = io::read_trip_file(filter_input);
        trip.validate(catalog);
        const dbn::CptSet cpts = dbn::load_cpts(io::read_file(filter_cpts));
        const dbn::FrameDiscretizer disc(catalog);
        if (disc.families() != cpts.families)
            throw ValidationError(
                "observation families in the tables do not match this catalog");
        const auto beliefs = dbn::filter_sequence(disc.discretize(trip), cpts);
        if (filter_format == "csv") {
            std::string text = "frame";
            for (const auto& s : cpts.states) text += ",p_" + s;
            text += ",argmax\n";
            for (std::size_t i = 0; i < beliefs.size(); ++i) {
                text += std::to_string(trip.frames[i].frame);
                for (double p : beliefs[i].probabilities) text += "," + fixed(p, 6);
                text += "," + cpts.states[beliefs[i].argmax()] + "\n";
            }
            io::atomic_write(filter_output, text);
        } else {
            json frames = json::array();
            for (std::size_t i = 0; i < beliefs.size(); ++i) {
                json p;
                for (std::size_t s = 0; s < cpts.states.size(); ++s)
                    p[cpts.states[s]] = beliefs[i].probabilities[s];
                frames.push_back({{"frame", trip.frames[i].frame},
                                  {"posterior", p},
                                  {"argmax", cpts.states[beliefs[i].argmax()]}});
            }
            io::atomic_write(filter_output, json{{"frames", frames}}.dump(2) + "\n");
        }
        finish("filter", {filter_input, filter_cpts}, {filter_output}, catalog,
               std::nullopt);
    });

    // train -----------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "Fit a classifier on trips");
    Common train_common;
    train_common.attach(train_cmd);
    ModelOptions train_model;
    train_model.attach(train_cmd);
    std::vector<std::string> train_inputs;
    std::string train_output;
    train_cmd->add_option("-i,--input", train_inputs, "Trip CSV (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    train_cmd->add_option("-o,--output", train_output, "Model JSON path")->required();
    train_cmd->callback([&] {
        const ParameterCatalog catalog = train_common.catalog();
        const ml::Dataset data = load_dataset(train_inputs, catalog);
        const ml::ModelSpec spec = train_model.build();
        const ml::TrainedModel model = ml::train(spec, data);
        io::atomic_write(train_output, ml::save_model(model));
        std::cerr << "trained " << spec.name << " on " << data.size() << " frames";
        if (model.oob_accuracy)
            std::cerr << ", oob accuracy " << fixed(100.0 * *model.oob_accuracy, 2) << "%";
        std::cerr << "\n";
        finish("train", train_inputs, {train_output}, catalog, spec.seed,
               {{"model", spec.name}});
    });

    // evaluate ----------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a model on labelled trips");
    Common eval_common;
    eval_common.attach(eval_cmd);
    std::vector<std::string> eval_inputs;
    std::string eval_model_file, eval_output, eval_format = "csv";
    bool eval_no_timing = false;
    eval_cmd->add_option("--model-file", eval_model_file, "Model JSON from train")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("-i,--input", eval_inputs, "Trip CSV (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("-o,--output", eval_output, "Report path")->required();
    eval_cmd->add_option("--format", eval_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    eval_cmd->add_flag("--no-timing", eval_no_timing,
                       "Omit throughput fields for reproducible output");
    eval_cmd->callback([&] {
        const ParameterCatalog catalog = eval_common.catalog();
        const ml::TrainedModel model = ml::load_model(io::read_file(eval_model_file));
        const ml::Dataset test = load_dataset(eval_inputs, catalog);
        const ml::EvaluationReport report = ml::evaluate(model, test);
        if (eval_format == "csv") {
            std::string text = "model,acc_pct,speed_obs_per_sec,train_time_sec\n";
            text += report.model_name + "," + fixed(report.accuracy_pct, 4) + ",";
            if (!eval_no_timing) text += shortest(report.predict_per_second);
            text += ",";
            if (!eval_no_timing) text += shortest(report.train_time_seconds);
            text += "\n";
            io::atomic_write(eval_output, text);
        } else {
            json doc;
            doc["model"] = report.model_name;
            doc["accuracy_pct"] = report.accuracy_pct;
            doc["classes"] = ml::kClassNames;
            doc["confusion"] = report.confusion;
            doc["per_class_recall"] = report.per_class_recall;
            doc["false_discovery_rate"] = report.false_discovery_rate;
            if (!eval_no_timing) {
                doc["predict_per_second"] = report.predict_per_second;
                doc["train_time_seconds"] = report.train_time_seconds;
            }
            io::atomic_write(eval_output, doc.dump(2) + "\n");
        }
        std::vector<std::string> inputs = {eval_model_file};
        inputs.insert(inputs.end(), eval_inputs.begin(), eval_inputs.end());
        finish("evaluate", inputs, {eval_output}, catalog, std::nullopt,
               {{"model", report.model_name}});
    });

    // cv ------------------------------------------------------------------
    auto* cv_cmd = app.add_subcommand("cv", "Stratified k-fold cross-validation");
    Common cv_common;
    cv_common.attach(cv_cmd);
    ModelOptions cv_model;
    cv_model.attach(cv_cmd);
    std::vector<std::string> cv_inputs;
    std::string cv_output, cv_format = "csv";
    std::size_t cv_folds = 5;
    cv_cmd->add_option("-i,--input", cv_inputs, "Trip CSV (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    cv_cmd->add_option("--folds", cv_folds, "Fold count")
        ->check(CLI::Range(std::size_t{2}, std::size_t{1000000}));
    cv_cmd->add_option("-o,--output", cv_output, "Report path")->required();
    cv_cmd->add_option("--format", cv_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cv_cmd->callback([&] {
        const ParameterCatalog catalog = cv_common.catalog();
        const ml::Dataset data = load_dataset(cv_inputs, catalog);
        const ml::ModelSpec spec = cv_model.build();
        const ml::CvResult result = ml::kfold_cv(spec, data, cv_folds, cv_model.seed);
        if (cv_format == "csv") {
            std::string text = "fold,accuracy_pct\n";
            for (std::size_t f = 0; f < result.fold_accuracy_pct.size(); ++f)
                text += std::to_string(f) + "," + fixed(result.fold_accuracy_pct[f], 4) + "\n";
            text += "mean," + fixed(result.mean_accuracy_pct, 4) + "\n";
            text += "std," + fixed(result.std_accuracy_pct, 4) + "\n";
            io::atomic_write(cv_output, text);
        } else {
            json doc;
            doc["model"] = spec.name;
            doc["fold_accuracy_pct"] = result.fold_accuracy_pct;
            doc["mean_accuracy_pct"] = result.mean_accuracy_pct;
            doc["std_accuracy_pct"] = result.std_accuracy_pct;
            io::atomic_write(cv_output, doc.dump(2) + "\n");
        }
        finish("cv", cv_inputs, {cv_output}, catalog, cv_model.seed,
               {{"model", spec.name}, {"folds", cv_folds}});
    });

    // rank ------------------------------------------------------------------
    auto* rank_cmd = app.add_subcommand(
        "rank", "Rank benchmark rows and compute the H statistic");
    Common rank_common;
    rank_common.attach(rank_cmd);
    std::string rank_input, rank_output, rank_format = "csv";
    rank_cmd->add_option("input", rank_input,
                         "CSV with model,acc_pct,speed_obs_per_sec,train_time_sec")
        ->required()
        ->check(CLI::ExistingFile);
    rank_cmd->add_option("-o,--output", rank_output, "Rank table path")->required();
    rank_cmd->add_option("--format", rank_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    rank_cmd->callback([&] {
        const ParameterCatalog catalog = rank_common.catalog();
        const CsvTable table = read_csv_table(rank_input);
        const std::size_t c_model = column_of(table, "model", rank_input);
        const std::size_t c_acc = column_of(table, "acc_pct", rank_input);
        const std::size_t c_speed = column_of(table, "speed_obs_per_sec", rank_input);
        const std::size_t c_time = column_of(table, "train_time_sec", rank_input);
        std::vector<ml::BenchEntry> entries;
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            entries.push_back({table.rows[r][c_model],
                               cell_double(table.rows[r][c_acc], r, "acc_pct"),
                               cell_double(table.rows[r][c_speed], r, "speed_obs_per_sec"),
                               cell_double(table.rows[r][c_time], r, "train_time_sec")});
        }
        const ml::RankTable ranks = ml::kruskal_wallis_ranks(entries);
        if (rank_format == "csv") {
            std::string text =
                "model,accuracy,accuracy_rank,speed_rank,train_time_rank,z_accuracy\n";
            for (const auto& row : ranks.rows) {
                text += row.model + "," + shortest(row.accuracy_pct) + "," +
                        fixed(row.accuracy_rank, 1) + "," + fixed(row.speed_rank, 1) +
                        "," + fixed(row.train_time_rank, 1) + "," +
                        fixed(row.z_accuracy, 4) + "\n";
            }
            io::atomic_write(rank_output, text);
        } else {
            json rows = json::array();
            for (const auto& row : ranks.rows)
                rows.push_back({{"model", row.model},
                                {"accuracy_pct", row.accuracy_pct},
                                {"accuracy_rank", row.accuracy_rank},
                                {"speed_rank", row.speed_rank},
                                {"train_time_rank", row.train_time_rank},
                                {"z_accuracy", row.z_accuracy}});
            io::atomic_write(rank_output,
                             json{{"h_statistic", ranks.h_statistic}, {"rows", rows}}
                                     .dump(2) +
                                 "\n");
        }
        std::cerr << "H = " << shortest(ranks.h_statistic) << "\n";
        finish("rank", {rank_input}, {rank_output}, catalog, std::nullopt,
               {{"h_statistic", ranks.h_statistic}});
    });

    // validate ----------------------------------------------------------------
    auto* val_cmd = app.add_subcommand(
        "validate", "Regression diagnostics of aggregate scores against the inputs");
    Common val_common;
    val_common.attach(val_cmd);
    std::vector<std::string> val_inputs;
    std::string val_output;
    double val_threshold = 0.1;
    val_cmd->add_option("-i,--input", val_inputs, "Trip CSV (repeatable)")
        ->required()
        ->check(CLI::ExistingFile);
    val_cmd->add_option("--threshold", val_threshold, "Residual correlation bound")
        ->check(CLI::PositiveNumber);
    val_cmd->add_option("-o,--output", val_output, "Report JSON path")->required();
    val_cmd->callback([&] {
        const ParameterCatalog catalog = val_common.catalog();
        // Regress the aggregate score on the nine weight fractions plus the
        // speed factor; the trailing history feature is excluded so the fit
        // has honest residuals.
        const std::size_t predictors = kParameterCount + 1;
        std::vector<std::vector<double>> X;
        std::vector<double> y;
        std::vector<std::string> names;
        for (const auto& path : val_inputs) {
            TripRecord trip = io::read_trip_file(path);
            trip.validate(catalog);
            const ml::Dataset data = ml::featurize(trip, catalog);
            if (names.empty())
                names.assign(data.feature_names.begin(),
                             data.feature_names.begin() + predictors);
            const auto rows = assess_stream(trip, catalog);
            for (std::size_t i = 0; i < data.points.size(); ++i) {
                X.emplace_back(data.points[i].features.begin(),
                               data.points[i].features.begin() + predictors);
                y.push_back(rows[i].aggregate_score);
            }
        }
        const stats::RegressionFit fit = stats::ols_fit(X, y, true, &names);
        const stats::Descriptive d = stats::describe(y);
        const stats::ResidualCorrelation corr =
            stats::residual_cross_correlation(fit.residuals, X, val_threshold);

        json coeffs = json::array();
        for (const auto& c : fit.coefficients)
            coeffs.push_back({{"name", c.name},
                              {"estimate", c.estimate},
                              {"std_error", c.std_error},
                              {"t_value", c.t_value},
                              {"p_value", c.p_value}});
        json features = json::array();
        for (std::size_t j = 0; j < predictors; ++j)
            features.push_back({{"name", names[j]},
                                {"correlation", corr.correlations[j]},
                                {"pass", static_cast<bool>(corr.pass[j])}});
        json doc;
        doc["regression"] = {{"coefficients", coeffs},
                             {"r_squared", fit.r_squared},
                             {"residual_standard_error", fit.residual_standard_error},
                             {"observations", fit.observations},
                             {"df_residual", fit.df_residual}};
        doc["response_stats"] = describe_json(d);
        doc["residual_correlation"] = {{"threshold", corr.threshold},
                                       {"all_pass", corr.all_pass},
                                       {"features", features}};
        io::atomic_write(val_output, doc.dump(2) + "\n");
        std::cerr << "r_squared = " << shortest(fit.r_squared)
                  << ", residual correlations "
                  << (corr.all_pass ? "within" : "exceed") << " "
                  << shortest(corr.threshold) << "\n";
        finish("validate", val_inputs, {val_output}, catalog, std::nullopt,
               {{"all_pass", corr.all_pass}});
    });

    // stats -----------------------------------------------------------------
    auto* stats_cmd = app.add_subcommand("stats", "Descriptive statistics of a column");
    Common stats_common;
    stats_common.attach(stats_cmd);
    std::string stats_input, stats_output, stats_column = "aggregate_score";
    std::string stats_format = "csv";
    stats_cmd->add_option("input", stats_input, "CSV file")
        ->required()
        ->check(CLI::ExistingFile);
    stats_cmd->add_option("--column", stats_column, "Column to describe");
    stats_cmd->add_option("-o,--output", stats_output, "Report path")->required();
    stats_cmd->add_option("--format", stats_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    stats_cmd->callback([&] {
        const ParameterCatalog catalog = stats_common.catalog();
        const CsvTable table = read_csv_table(stats_input);
        const std::vector<double> values =
            column_values(table, column_of(table, stats_column, stats_input), stats_column);
        const stats::Descriptive d = stats::describe(values);
        if (stats_format == "csv") {
            const auto opt = [](const std::optional<double>& v) {
                return v ? shortest(*v) : std::string();
            };
            std::string text = "statistic,value\n";
            text += "count," + std::to_string(d.count) + "\n";
            text += "mean," + shortest(d.mean) + "\n";
            text += "standard_error," + shortest(d.standard_error) + "\n";
            text += "median," + shortest(d.median) + "\n";
            text += "standard_deviation," + shortest(d.standard_deviation) + "\n";
            text += "sample_variance," + shortest(d.sample_variance) + "\n";
            text += "skewness," + opt(d.skewness) + "\n";
            text += "kurtosis," + opt(d.kurtosis) + "\n";
            text += "excess_kurtosis," + opt(d.excess_kurtosis) + "\n";
            text += "minimum," + shortest(d.min) + "\n";
            text += "maximum," + shortest(d.max) + "\n";
            text += "range," + shortest(d.range) + "\n";
            text += "sum," + shortest(d.sum) + "\n";
            text += "confidence_95," + shortest(d.confidence_95) + "\n";
            io::atomic_write(stats_output, text);
        } else {
            io::atomic_write(stats_output, describe_json(d).dump(2) + "\n");
        }
        finish("stats", {stats_input}, {stats_output}, catalog, std::nullopt,
               {{"column", stats_column}});
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
