// Command-line front end: network generation, the tracking benchmark, and
// report inspection. Exit codes: 0 ok, 2 bad configuration, 3 numerical
// failure, 4 I/O failure. Errors go to stderr as one JSON object.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rdkf/errors.hpp"
#include "rdkf/graph.hpp"
#include "rdkf/harness.hpp"
#include "rdkf/least_favorable.hpp"
#include "rdkf/preset.hpp"

namespace {

using nlohmann::json;

void emit_error(const std::string& type, const std::string& message) {
    json doc;
    doc["error"]["type"] = type;
    doc["error"]["message"] = message;
    std::fprintf(stderr, "%s\n", doc.dump(2).c_str());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw rdkf::io_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw rdkf::io_error("cannot read " + path);
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw rdkf::io_error("cannot open " + path + " for writing");
    out << text;
    out.flush();
    if (!out) throw rdkf::io_error("cannot write " + path);
}

// Shared flags that assemble a TrackingOptions. Every subcommand that builds
// the preset registers the same names so invocations stay uniform.
void add_preset_flags(CLI::App* cmd, rdkf::TrackingOptions& opts) {
    cmd->add_option("--nodes", opts.num_nodes, "network size");
    cmd->add_option("--sensors", opts.num_sensors, "sensor node count");
    cmd->add_option("--density", opts.density, "directed edge density");
    cmd->add_option("--seed", opts.seed, "master seed");
    cmd->add_option("--tolerance", opts.b, "ambiguity radius b");
    cmd->add_option("--noise-scale", opts.noise_scale, "k in R^i = sqrt(k) P R0 P^T");
}

void print_summary_table(const std::vector<rdkf::VariantSummary>& table) {
    std::printf("%-10s %18s %14s\n", "variant", "steady_state_mse", "mean_tx_rate");
    for (const auto& row : table)
        std::printf("%-10s %18.6f %14.4f\n", row.name.c_str(), row.steady_state_mse,
                    row.mean_tx_rate);
}

int run_cli(int argc, char** argv) {
    CLI::App app{"robust distributed Kalman filtering over sensor networks"};
    app.require_subcommand(1);

    // generate-network
    auto* gen = app.add_subcommand("generate-network", "emit a random strongly connected network");
    int gen_nodes = 100, gen_sensors = 20;
    double gen_density = 0.04;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    gen->add_option("--nodes", gen_nodes, "network size");
    gen->add_option("--sensors", gen_sensors, "sensor node count");
    gen->add_option("--density", gen_density, "directed edge density");
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("--out", gen_out, "output file (stdout when omitted)");

    // run
    auto* run = app.add_subcommand("run", "run a Monte Carlo benchmark and write a report");
    std::string run_preset, run_config, run_out = "out";
    rdkf::TrackingOptions opts;
    std::vector<std::string> run_variants;
    int run_runs = -1, run_horizon = -1, run_threads = -1;
    std::uint64_t run_seed = 0;
    auto* opt_preset = run->add_option("--preset", run_preset, "built-in benchmark (tracking)");
    auto* opt_config = run->add_option("--config", run_config, "experiment configuration JSON");
    auto* opt_nodes = run->add_option("--nodes", opts.num_nodes, "network size");
    auto* opt_sensors = run->add_option("--sensors", opts.num_sensors, "sensor node count");
    auto* opt_density = run->add_option("--density", opts.density, "directed edge density");
    auto* opt_tol = run->add_option("--tolerance", opts.b, "ambiguity radius b");
    auto* opt_noise = run->add_option("--noise-scale", opts.noise_scale, "measurement noise scale");
    auto* opt_alpha = run->add_option("--alpha", opts.alpha, "trigger mean threshold");
    auto* opt_beta = run->add_option("--beta", opts.beta, "trigger lower covariance slack");
    auto* opt_delta = run->add_option("--delta", opts.delta, "trigger upper covariance slack");
    run->add_option("--runs", run_runs, "Monte Carlo runs");
    run->add_option("--horizon", run_horizon, "steps per run");
    run->add_option("--threads", run_threads, "worker threads (0 = hardware)");
    auto* opt_seed = run->add_option("--seed", run_seed, "master seed");
    run->add_option("--variant", run_variants, "variant name filter (repeatable)");
    run->add_option("--out", run_out, "report directory");
    opt_config->excludes(opt_preset);
    for (auto* o : {opt_nodes, opt_sensors, opt_density, opt_tol, opt_noise, opt_alpha, opt_beta,
                    opt_delta})
        o->excludes(opt_config);

    // steady-state
    auto* ss = app.add_subcommand("steady-state", "solve the stationary robust prediction law");
    rdkf::TrackingOptions ss_opts;
    std::string ss_preset = "tracking";
    ss->add_option("--preset", ss_preset, "built-in benchmark (tracking)");
    add_preset_flags(ss, ss_opts);

    // tolerances
    auto* tol = app.add_subcommand("tolerances", "per-sensor tolerances from the stationary law");
    rdkf::TrackingOptions tol_opts;
    std::string tol_preset = "tracking";
    tol->add_option("--preset", tol_preset, "built-in benchmark (tracking)");
    add_preset_flags(tol, tol_opts);

    // report
    auto* rep = app.add_subcommand("report", "print the variant table of a written report");
    std::string rep_in;
    rep->add_option("--in", rep_in, "report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("config", e.what());
        return 2;
    }
    const bool run_seed_set = opt_seed->count() > 0;

    if (gen->parsed()) {
        rdkf::Rng rng = rdkf::Rng::substream(gen_seed, 0xffff0001ull);
        rdkf::SensorNetwork net =
            rdkf::random_strongly_connected(gen_nodes, gen_sensors, gen_density, rng);
        std::string doc = rdkf::network_to_json(net);
        if (gen_out.empty())
            std::printf("%s\n", doc.c_str());
        else
            write_file(gen_out, doc);
        return 0;
    }

    if (run->parsed()) {
        rdkf::ExperimentConfig config;
        if (!run_config.empty()) {
            config = rdkf::experiment_from_json(read_file(run_config));
        } else {
            if (run_preset.empty()) run_preset = "tracking";
            if (run_preset != "tracking")
                throw std::invalid_argument("unknown preset: " + run_preset);
            if (run_runs > 0) opts.num_runs = run_runs;
            if (run_horizon > 0) opts.horizon = run_horizon;
            if (run_threads >= 0) opts.threads = run_threads;
            if (run_seed_set) opts.seed = run_seed;
            config = rdkf::preset_tracking(opts);
        }
        if (run_runs > 0) config.num_runs = run_runs;
        if (run_horizon > 0) config.horizon = run_horizon;
        if (run_threads >= 0) config.threads = run_threads;
        if (run_seed_set) config.seed = run_seed;
        if (!run_variants.empty()) {
            std::vector<rdkf::VariantSpec> kept;
            for (const std::string& name : run_variants) {
                bool found = false;
                for (const auto& v : config.variants)
                    if (v.name == name) {
                        kept.push_back(v);
                        found = true;
                    }
                if (!found) throw std::invalid_argument("unknown variant: " + name);
            }
            config.variants = std::move(kept);
        }
        rdkf::MetricsReport report = rdkf::run_experiment(config);
        rdkf::write_report(report, run_out);
        print_summary_table(rdkf::compare_variants(report));
        std::printf("report written to %s\n", run_out.c_str());
        return 0;
    }

    if (ss->parsed()) {
        if (ss_preset != "tracking") throw std::invalid_argument("unknown preset: " + ss_preset);
        rdkf::Rng model_rng = rdkf::Rng::substream(ss_opts.seed, 0xffff0002ull);
        rdkf::StateSpaceModel model =
            rdkf::tracking_model(ss_opts.num_sensors, ss_opts.noise_scale, model_rng);
        rdkf::SteadyState steady = rdkf::robust_steady_state(model, ss_opts.b);
        Eigen::SelfAdjointEigenSolver<rdkf::Mat> es(steady.V_inf);
        json doc;
        doc["b"] = ss_opts.b;
        doc["theta_inf"] = steady.theta_inf;
        doc["iterations"] = steady.iterations;
        doc["v_inf_min_eig"] = es.eigenvalues().minCoeff();
        doc["v_inf_max_eig"] = es.eigenvalues().maxCoeff();
        std::printf("%s\n", doc.dump(2).c_str());
        return 0;
    }

    if (tol->parsed()) {
        if (tol_preset != "tracking") throw std::invalid_argument("unknown preset: " + tol_preset);
        rdkf::ExperimentConfig config = rdkf::preset_tracking(tol_opts);
        json locals = json::array();
        for (const auto& v : config.variants) {
            if (v.variant.kind != rdkf::FilterVariant::Kind::rdkfloc) continue;
            for (const auto& [node, bi] : v.variant.sensor_b) {
                json row;
                row["node"] = node;
                row["b_local"] = bi;
                locals.push_back(row);
            }
        }
        json doc;
        doc["b"] = tol_opts.b;
        doc["locals"] = locals;
        std::printf("%s\n", doc.dump(2).c_str());
        return 0;
    }

    if (rep->parsed()) {
        json doc = json::parse(read_file(rep_in + "/summary.json"));
        std::vector<rdkf::VariantSummary> table;
        for (const auto& v : doc.at("variants")) {
            rdkf::VariantSummary row;
            row.name = v.at("name").get<std::string>();
            row.steady_state_mse = v.at("steady_state_mse").get<double>();
            row.mean_tx_rate = v.at("mean_tx_rate").get<double>();
            table.push_back(row);
        }
        std::stable_sort(table.begin(), table.end(),
                         [](const auto& a, const auto& b) {
                             return a.steady_state_mse < b.steady_state_mse;
                         });
        print_summary_table(table);
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const rdkf::numerical_error& e) {
        emit_error("numerical", e.what());
        return 3;
    } catch (const rdkf::io_error& e) {
        emit_error("io", e.what());
        return 4;
    } catch (const std::filesystem::filesystem_error& e) {
        emit_error("io", e.what());
        return 4;
    } catch (const nlohmann::json::exception& e) {
        emit_error("config", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        emit_error("config", e.what());
        return 2;
    } catch (const std::exception& e) {
        emit_error("config", e.what());
        return 2;
    }
}
