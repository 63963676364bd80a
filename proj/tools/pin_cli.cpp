// pin: command-line front end for training, evaluating and explaining
// tree-like pairwise interaction networks.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pin/pin.hpp"

namespace {

using nlohmann::json;

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

/// Every command writes a manifest next to its primary output so the run can
/// be reproduced exactly.
void write_manifest(const std::string& primary_out, const std::string& command,
                    const std::vector<std::string>& argv, const std::vector<std::uint64_t>& seeds,
                    const std::vector<std::string>& config_paths,
                    const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["argv"] = argv;
    m["seeds"] = seeds;
    m["config_paths"] = config_paths;
    m["outputs"] = outputs;
    m["library_version"] = pin::kLibraryVersion;
    m["timestamp"] = iso_timestamp();
    pin::detail::write_atomic(primary_out + ".manifest.json", m.dump(1) + "\n");
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pin::IngestError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw pin::IngestError("'" + path + "': " + e.what());
    }
    return j;
}

struct ArchConfig {
    pin::HyperParams hp;
    std::optional<pin::FeatureSchema> schema;
};

ArchConfig load_arch_config(const std::string& path) {
    const json j = load_json_file(path);
    ArchConfig cfg;
    cfg.hp.d = j.value("d", cfg.hp.d);
    cfg.hp.d_prime = j.value("d_prime", cfg.hp.d_prime);
    cfg.hp.d0 = j.value("d0", cfg.hp.d0);
    cfg.hp.d1 = j.value("d1", cfg.hp.d1);
    cfg.hp.d2 = j.value("d2", cfg.hp.d2);
    if (j.contains("schema")) cfg.schema = pin::schema_from_json(j["schema"]);
    return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
    const auto dots = spec.find("..");
    std::vector<std::uint64_t> seeds;
    if (dots != std::string::npos) {
        const std::uint64_t lo = std::stoull(spec.substr(0, dots));
        const std::uint64_t hi = std::stoull(spec.substr(dots + 2));
        if (hi < lo) throw pin::ContractError("--seeds: range end before start");
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
        return seeds;
    }
    std::size_t start = 0;
    while (start <= spec.size()) {
        const auto comma = spec.find(',', start);
        const std::string tok = spec.substr(start, comma == std::string::npos ? std::string::npos
                                                                              : comma - start);
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (seeds.empty()) throw pin::ContractError("--seeds: no seeds given");
    return seeds;
}

std::string with_seed_suffix(const std::string& path, std::uint64_t seed) {
    const auto dot = path.rfind('.');
    if (dot == std::string::npos || path.find('/', dot) != std::string::npos)
        return path + ".seed" + std::to_string(seed);
    return path.substr(0, dot) + ".seed" + std::to_string(seed) + path.substr(dot);
}

/// Load a CSV against the model's own schema and apply its scalers.
pin::Dataset load_for_model(const pin::PinModel& model, const std::string& csv_path) {
    return pin::apply_scalers(pin::load_csv(csv_path, model.schema), model.scalers);
}

double mean(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double stdev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

void run_parallel(std::size_t items, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || items <= 1) {
        for (std::size_t i = 0; i < items; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr error;
    for (std::size_t t = 0; t < std::min(jobs, items); ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= items) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pin: tree-like pairwise interaction networks for tabular frequency data"};
    app.require_subcommand(1);
    std::vector<std::string> raw_args(argv, argv + argc);

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "fit PIN models (optionally one per seed)");
    std::string tr_data, tr_schema, tr_config, tr_model_config, tr_out, tr_history, tr_seeds;
    std::uint64_t tr_seed = 1;
    std::size_t tr_jobs = 1, tr_max_epochs = 0;
    bool tr_diagonal = false;
    train_cmd->add_option("--data", tr_data, "learning data CSV")->required();
    train_cmd->add_option("--schema", tr_schema, "schema JSON")->required();
    train_cmd->add_option("--config", tr_config, "training config JSON");
    train_cmd->add_option("--model-config", tr_model_config, "architecture JSON (d, d_prime, d0, d1, d2)");
    train_cmd->add_option("--out", tr_out, "output model file")->required();
    train_cmd->add_option("--history", tr_history, "per-epoch history CSV");
    train_cmd->add_option("--seed", tr_seed, "run seed (default 1)");
    train_cmd->add_option("--seeds", tr_seeds, "seed list or range, e.g. 1..10");
    train_cmd->add_option("--jobs", tr_jobs, "parallel seed runs");
    train_cmd->add_option("--max-epochs", tr_max_epochs, "override config max epochs");
    train_cmd->add_flag("--diagonal-only", tr_diagonal, "freeze all off-diagonal pairs at 0");

    // ---- evaluate ----
    auto* eval_cmd = app.add_subcommand("evaluate", "Poisson deviance of model(s) on a dataset");
    std::vector<std::string> ev_models;
    std::string ev_data, ev_schema;
    eval_cmd->add_option("--model", ev_models, "model file(s); several form an ensemble")->required();
    eval_cmd->add_option("--data", ev_data, "evaluation data CSV")->required();
    eval_cmd->add_option("--schema", ev_schema, "schema JSON (checked against the model)");

    // ---- predict ----
    auto* pred_cmd = app.add_subcommand("predict", "write per-row frequency predictions");
    std::vector<std::string> pr_models;
    std::string pr_data, pr_out;
    pred_cmd->add_option("--model", pr_models, "model file(s)")->required();
    pred_cmd->add_option("--data", pr_data, "input CSV")->required();
    pred_cmd->add_option("--out", pr_out, "output CSV")->required();

    // ---- importance ----
    auto* imp_cmd = app.add_subcommand("importance", "rank pairwise interactions by held-out loss decrease");
    std::string im_data, im_test, im_schema, im_config, im_model_config, im_out;
    std::uint64_t im_seed = 1;
    imp_cmd->add_option("--data", im_data, "learning data CSV")->required();
    imp_cmd->add_option("--test", im_test, "held-out data CSV")->required();
    imp_cmd->add_option("--schema", im_schema, "schema JSON")->required();
    imp_cmd->add_option("--config", im_config, "training config JSON");
    imp_cmd->add_option("--model-config", im_model_config, "architecture JSON");
    imp_cmd->add_option("--out", im_out, "importance table CSV")->required();
    imp_cmd->add_option("--seed", im_seed, "run seed");

    // ---- select ----
    auto* sel_cmd = app.add_subcommand("select", "multi-round forward selection of interaction pairs");
    std::string se_data, se_test, se_schema, se_config, se_model_config, se_out;
    std::uint64_t se_seed = 1;
    std::size_t se_rounds = 2;
    sel_cmd->add_option("--data", se_data, "learning data CSV")->required();
    sel_cmd->add_option("--test", se_test, "held-out data CSV")->required();
    sel_cmd->add_option("--schema", se_schema, "schema JSON")->required();
    sel_cmd->add_option("--config", se_config, "training config JSON");
    sel_cmd->add_option("--model-config", se_model_config, "architecture JSON");
    sel_cmd->add_option("--rounds", se_rounds, "selection rounds");
    sel_cmd->add_option("--out", se_out, "per-round importance CSV")->required();
    sel_cmd->add_option("--seed", se_seed, "run seed");

    // ---- shap ----
    auto* shap_cmd = app.add_subcommand("shap", "paired-permutation SHAP reports");
    std::string sh_model, sh_data, sh_explain, sh_out, sh_method = "paired";
    std::size_t sh_instances = 100, sh_background = 2000, sh_jobs = 1;
    std::uint64_t sh_seed = 1;
    bool sh_waterfall = false;
    shap_cmd->add_option("--model", sh_model, "model file")->required();
    shap_cmd->add_option("--data", sh_data, "learning data CSV (background source)")->required();
    shap_cmd->add_option("--explain", sh_explain, "CSV of instances to explain (default: --data)");
    shap_cmd->add_option("--instances", sh_instances, "number of instances to explain");
    shap_cmd->add_option("--background", sh_background, "background set size");
    shap_cmd->add_option("--method", sh_method, "paired | subsets | full")
        ->check(CLI::IsMember({"paired", "subsets", "full"}));
    shap_cmd->add_option("--out", sh_out, "output directory")->required();
    shap_cmd->add_option("--seed", sh_seed, "sampling seed");
    shap_cmd->add_option("--jobs", sh_jobs, "parallel instance explanation");
    shap_cmd->add_flag("--waterfall", sh_waterfall, "also write per-instance waterfall CSVs");

    // ---- grid ----
    auto* grid_cmd = app.add_subcommand("grid", "marginalized two-feature prediction heatmap data");
    std::string gr_model, gr_data, gr_feat_a, gr_feat_b, gr_out;
    std::size_t gr_resolution = 50, gr_background = 1000;
    std::uint64_t gr_seed = 1;
    grid_cmd->add_option("--model", gr_model, "model file")->required();
    grid_cmd->add_option("--data", gr_data, "background rows CSV")->required();
    grid_cmd->add_option("--feature-a", gr_feat_a, "first feature name")->required();
    grid_cmd->add_option("--feature-b", gr_feat_b, "second feature name")->required();
    grid_cmd->add_option("--resolution", gr_resolution, "grid resolution per axis");
    grid_cmd->add_option("--background", gr_background, "background subsample size");
    grid_cmd->add_option("--seed", gr_seed, "subsample seed");
    grid_cmd->add_option("--out", gr_out, "output CSV")->required();

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "generate synthetic Poisson frequency data");
    std::string sy_spec, sy_out, sy_oracle, sy_schema_out;
    synth_cmd->add_option("--spec", sy_spec, "generator spec JSON")->required();
    synth_cmd->add_option("--out", sy_out, "output CSV")->required();
    synth_cmd->add_option("--oracle", sy_oracle, "oracle JSON output");
    synth_cmd->add_option("--schema-out", sy_schema_out, "write the generated schema JSON here");

    // ---- inspect ----
    auto* ins_cmd = app.add_subcommand("inspect", "parameter accounting for an architecture");
    std::string in_config, in_schema;
    ins_cmd->add_option("--config", in_config, "architecture JSON (dims, optional schema)")->required();
    ins_cmd->add_option("--schema", in_schema, "schema JSON (if not embedded in the config)");

    try {
        app.parse(argc, argv);

        if (*train_cmd) {
            const pin::FeatureSchema schema = pin::schema_from_json(load_json_file(tr_schema));
            auto [scaled, scalers] = pin::fit_apply_scalers(pin::load_csv(tr_data, schema));
            pin::TrainConfig cfg;
            std::vector<std::string> config_paths = {tr_schema};
            if (!tr_config.empty()) {
                cfg = pin::train_config_from_json(load_json_file(tr_config));
                config_paths.push_back(tr_config);
            }
            if (tr_max_epochs > 0) cfg.max_epochs = tr_max_epochs;
            pin::ModelSkeleton skel;
            if (!tr_model_config.empty()) {
                skel.hp = load_arch_config(tr_model_config).hp;
                config_paths.push_back(tr_model_config);
            }
            skel.scalers = scalers;
            if (tr_diagonal) skel.active = pin::diagonal_mask(schema.feature_count());

            std::vector<std::uint64_t> seeds = tr_seeds.empty()
                                                   ? std::vector<std::uint64_t>{tr_seed}
                                                   : parse_seeds(tr_seeds);
            std::vector<std::string> outputs(seeds.size());
            std::vector<double> final_val(seeds.size(), 0.0);
            run_parallel(seeds.size(), tr_jobs, [&](std::size_t i) {
                auto [model, history] = pin::train(scaled, skel, cfg, seeds[i]);
                const std::string path =
                    seeds.size() == 1 ? tr_out : with_seed_suffix(tr_out, seeds[i]);
                pin::save_model(model, path);
                outputs[i] = path;
                if (!history.val_loss.empty())
                    final_val[i] = history.val_loss[history.restored_epoch];
                if (!tr_history.empty())
                    pin::write_history_csv(history, seeds.size() == 1
                                                        ? tr_history
                                                        : with_seed_suffix(tr_history, seeds[i]));
            });
            for (std::size_t i = 0; i < seeds.size(); ++i)
                std::printf("seed %llu: best validation deviance %.3f (1e-2 units), model %s\n",
                            static_cast<unsigned long long>(seeds[i]), 100.0 * final_val[i],
                            outputs[i].c_str());
            if (seeds.size() > 1)
                std::printf("validation deviance over %zu seeds: %.3f +/- %.3f (1e-2 units)\n",
                            seeds.size(), 100.0 * mean(final_val), 100.0 * stdev(final_val));
            write_manifest(tr_out, "train", raw_args, seeds, config_paths, outputs);
            return 0;
        }

        if (*eval_cmd) {
            std::vector<pin::PinModel> models;
            for (const auto& path : ev_models) models.push_back(pin::load_model(path));
            if (!ev_schema.empty()) {
                const auto schema = pin::schema_from_json(load_json_file(ev_schema));
                if (!(schema == models.front().schema))
                    throw pin::ContractError("evaluate: --schema does not match the model's schema");
            }
            const pin::Dataset data = load_for_model(models.front(), ev_data);
            const double loss = models.size() == 1 ? pin::evaluate(models.front(), data)
                                                   : pin::evaluate_ensemble(models, data);
            std::printf("rows %zu\npoisson_deviance_1e2 %.3f\n", data.rows(), 100.0 * loss);
            return 0;
        }

        if (*pred_cmd) {
            std::vector<pin::PinModel> models;
            for (const auto& path : pr_models) models.push_back(pin::load_model(path));
            const pin::Dataset data = load_for_model(models.front(), pr_data);
            std::ofstream out(pr_out);
            if (!out) throw pin::Error("cannot write '" + pr_out + "'");
            out << "row,prediction\n";
            for (std::size_t i = 0; i < data.rows(); ++i)
                out << i << ',' << pin::ensemble_predict(models, data.row(i)) << '\n';
            write_manifest(pr_out, "predict", raw_args, {}, {}, {pr_out});
            return 0;
        }

        if (*imp_cmd) {
            const pin::FeatureSchema schema = pin::schema_from_json(load_json_file(im_schema));
            auto [learn, scalers] = pin::fit_apply_scalers(pin::load_csv(im_data, schema));
            const pin::Dataset test =
                pin::apply_scalers(pin::load_csv(im_test, schema), scalers);
            pin::TrainConfig cfg;
            std::vector<std::string> config_paths = {im_schema};
            if (!im_config.empty()) {
                cfg = pin::train_config_from_json(load_json_file(im_config));
                config_paths.push_back(im_config);
            }
            pin::ModelSkeleton skel;
            if (!im_model_config.empty()) {
                skel.hp = load_arch_config(im_model_config).hp;
                config_paths.push_back(im_model_config);
            }
            skel.scalers = scalers;
            auto baseline = pin::fit_diagonal_baseline(learn, skel, cfg, im_seed).first;
            pin::BaselineStack stack{baseline, {}};
            const auto mo = pin::fit_multioutput(stack, learn, cfg, pin::derive_seed(im_seed, 7));
            auto table = pin::importance_scores(mo, test);
            pin::write_importance_csv({&table, 1}, schema, im_out, 100.0);
            const auto& top = table.rows.front();
            std::printf("baseline test deviance %.3f (1e-2 units)\n", 100.0 * table.baseline_loss);
            std::printf("top pair %s:%s delta %.4f (1e-2 units)\n",
                        schema.features[top.pair.j].name.c_str(),
                        schema.features[top.pair.k].name.c_str(), 100.0 * top.delta);
            write_manifest(im_out, "importance", raw_args, {im_seed}, config_paths, {im_out});
            return 0;
        }

        if (*sel_cmd) {
            const pin::FeatureSchema schema = pin::schema_from_json(load_json_file(se_schema));
            auto [learn, scalers] = pin::fit_apply_scalers(pin::load_csv(se_data, schema));
            const pin::Dataset test =
                pin::apply_scalers(pin::load_csv(se_test, schema), scalers);
            pin::TrainConfig cfg;
            std::vector<std::string> config_paths = {se_schema};
            if (!se_config.empty()) {
                cfg = pin::train_config_from_json(load_json_file(se_config));
                config_paths.push_back(se_config);
            }
            pin::ModelSkeleton skel;
            if (!se_model_config.empty()) {
                skel.hp = load_arch_config(se_model_config).hp;
                config_paths.push_back(se_model_config);
            }
            skel.scalers = scalers;
            const auto result = pin::forward_select(learn, test, se_rounds, skel, cfg, se_seed);
            pin::write_importance_csv(result.tables, schema, se_out, 100.0);
            for (std::size_t r = 0; r < result.selected.size(); ++r)
                std::printf("round %zu: selected %s:%s (delta %.4f, 1e-2 units)\n", r + 1,
                            schema.features[result.selected[r].j].name.c_str(),
                            schema.features[result.selected[r].k].name.c_str(),
                            100.0 * result.tables[r].rows.front().delta);
            write_manifest(se_out, "select", raw_args, {se_seed}, config_paths, {se_out});
            return 0;
        }

        if (*shap_cmd) {
            const pin::PinModel model = pin::load_model(sh_model);
            const pin::Dataset data = load_for_model(model, sh_data);
            const pin::Dataset explain_src =
                sh_explain.empty() ? data : load_for_model(model, sh_explain);
            const pin::Dataset background =
                pin::make_background(data, sh_background, pin::derive_seed(sh_seed, 1));
            pin::Rng pick(pin::derive_seed(sh_seed, 2));
            auto chosen = pick.sample_without_replacement(
                explain_src.rows(), std::min(sh_instances, explain_src.rows()));
            std::sort(chosen.begin(), chosen.end());
            const pin::Dataset instances = explain_src.subset(chosen);

            std::filesystem::create_directories(sh_out);
            const pin::BackgroundWorkspace ws(model, background);
            std::vector<pin::ShapReport> reports(instances.rows());
            const auto t0 = std::chrono::steady_clock::now();
            run_parallel(instances.rows(), sh_jobs, [&](std::size_t i) {
                if (sh_method == "subsets")
                    reports[i] = pin::shapley_exact_subsets(instances.row(i), model, ws, i);
                else if (sh_method == "full")
                    reports[i] = pin::shapley_permutation_full(instances.row(i), model, ws, i);
                else
                    reports[i] = pin::shapley_paired_permutation(instances.row(i), model, ws, {}, i);
            });
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            char name[64];
            std::vector<std::string> outputs;
            for (std::size_t i = 0; i < reports.size(); ++i) {
                std::snprintf(name, sizeof name, "/shap_%04zu.csv", i);
                pin::write_shap_report_csv(reports[i], model.schema, sh_out + name);
                outputs.push_back(sh_out + name);
                if (sh_waterfall) {
                    std::snprintf(name, sizeof name, "/waterfall_%04zu.csv", i);
                    pin::write_waterfall_csv(reports[i], model.schema, sh_out + name);
                }
            }
            std::vector<double> mean_abs(model.q(), 0.0);
            for (const auto& r : reports)
                for (std::size_t j = 0; j < mean_abs.size(); ++j)
                    mean_abs[j] += std::fabs(r.psi[j]) / static_cast<double>(reports.size());
            pin::write_shap_importance_csv(mean_abs, model.schema, sh_out + "/importance.csv");
            std::printf("explained %zu instances (|B|=%zu, method %s) in %.2f s\n",
                        instances.rows(), background.rows(), sh_method.c_str(), elapsed);
            write_manifest(sh_out + "/shap", "shap", raw_args, {sh_seed}, {}, outputs);
            return 0;
        }

        if (*grid_cmd) {
            const pin::PinModel model = pin::load_model(gr_model);
            const pin::Dataset data = load_for_model(model, gr_data);
            const pin::Dataset background =
                pin::make_background(data, gr_background, pin::derive_seed(gr_seed, 1));
            std::size_t fa = model.q(), fb = model.q();
            for (std::size_t j = 0; j < model.q(); ++j) {
                if (model.schema.features[j].name == gr_feat_a) fa = j;
                if (model.schema.features[j].name == gr_feat_b) fb = j;
            }
            if (fa == model.q() || fb == model.q())
                throw pin::ContractError("grid: unknown feature name");
            const auto table = pin::predict_grid(model, fa, fb, gr_resolution, background);
            std::ofstream out(gr_out);
            if (!out) throw pin::Error("cannot write '" + gr_out + "'");
            out << table.feature_a << "_scaled," << table.feature_b << "_scaled,"
                << table.feature_a << ',' << table.feature_b << ",mean_prediction\n";
            for (const auto& cell : table.cells)
                out << cell.a << ',' << cell.b << ',' << model.scalers.invert(fa, cell.a) << ','
                    << model.scalers.invert(fb, cell.b) << ',' << cell.mean_prediction << '\n';
            write_manifest(gr_out, "grid", raw_args, {gr_seed}, {}, {gr_out});
            return 0;
        }

        if (*synth_cmd) {
            const auto spec = pin::generator_spec_from_json(load_json_file(sy_spec));
            auto [data, oracle] = pin::generate(spec);
            pin::write_csv(data, sy_out);
            std::vector<std::string> outputs = {sy_out};
            if (!sy_schema_out.empty()) {
                pin::detail::write_atomic(sy_schema_out,
                                          pin::schema_to_json(data.schema).dump(1) + "\n");
                outputs.push_back(sy_schema_out);
            }
            if (!sy_oracle.empty()) {
                const std::string rates_path = sy_oracle + ".logrates.csv";
                std::ofstream rates(rates_path);
                if (!rates) throw pin::Error("cannot write '" + rates_path + "'");
                rates << "log_rate\n";
                for (double lr : oracle.log_rate) rates << lr << '\n';
                pin::detail::write_atomic(
                    sy_oracle, pin::oracle_to_json(spec, oracle, rates_path).dump(1) + "\n");
                outputs.push_back(sy_oracle);
                outputs.push_back(rates_path);
            }
            std::printf("wrote %zu rows to %s (true deviance %.4f, 1e-2 units: %.3f)\n",
                        data.rows(), sy_out.c_str(), oracle.true_deviance,
                        100.0 * oracle.true_deviance);
            write_manifest(sy_out, "synth", raw_args, {spec.seed}, {sy_spec}, outputs);
            return 0;
        }

        if (*ins_cmd) {
            const ArchConfig cfg = load_arch_config(in_config);
            pin::FeatureSchema schema;
            if (!in_schema.empty())
                schema = pin::schema_from_json(load_json_file(in_schema));
            else if (cfg.schema)
                schema = *cfg.schema;
            else
                throw pin::ContractError("inspect: no schema (embed one in --config or pass --schema)");
            const auto counts = pin::parameter_count(cfg.hp, schema);
            std::size_t n_cont = 0, n_cat = 0;
            for (const auto& f : schema.features)
                (f.kind == pin::FeatureKind::Categorical ? n_cat : n_cont) += 1;
            const std::size_t q = schema.feature_count();
            std::printf("%-52s %8s\n", "module", "weights");
            std::printf("%-52s %8zu\n",
                        ("continuous features (" + std::to_string(n_cont) + "), d'=" +
                         std::to_string(cfg.hp.d_prime) + ", d=" + std::to_string(cfg.hp.d))
                            .c_str(),
                        counts.continuous);
            std::printf("%-52s %8zu\n", ("categorical features (" + std::to_string(n_cat) + ")").c_str(),
                        counts.categorical);
            std::printf("%-52s %8zu\n",
                        ("interaction tokens (" + std::to_string(pin::pair_count(q)) + "), d0=" +
                         std::to_string(cfg.hp.d0))
                            .c_str(),
                        counts.tokens);
            std::printf("%-52s %8zu\n", ("1st FNN layer, d1=" + std::to_string(cfg.hp.d1)).c_str(),
                        counts.layer1);
            std::printf("%-52s %8zu\n", ("2nd FNN layer, d2=" + std::to_string(cfg.hp.d2)).c_str(),
                        counts.layer2);
            std::printf("%-52s %8zu\n", "output layer", counts.output_layer);
            std::printf("%-52s %8zu\n", "output weights (incl. bias)", counts.output_weights);
            std::printf("total %zu\n", counts.total());
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const pin::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
