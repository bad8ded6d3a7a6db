#include "rdkf/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include "rdkf/errors.hpp"

namespace rdkf {

namespace {

// Compensated accumulation; reductions over runs always add in run order so
// the report does not depend on the thread count.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

std::vector<Vec> split_channels(const StateSpaceModel& model, const Vec& y) {
    std::vector<Vec> out;
    out.reserve(model.channels.size());
    int row = 0;
    for (const SensorChannel& ch : model.channels) {
        const int rows = static_cast<int>(ch.C.rows());
        out.push_back(y.segment(row, rows));
        row += rows;
    }
    return out;
}

// Everything one run contributes, stored per variant and reduced later.
struct RunResult {
    std::vector<std::vector<double>> mse_t;
    std::vector<std::vector<double>> mse_node;
    std::vector<std::vector<double>> tx_rate;
    std::vector<std::vector<double>> theta_c, theta_bar_c, theta_s, theta_bar_s;
    std::vector<std::vector<double>> min_omega_t;
    std::vector<double> max_budget_used;
    std::vector<long long> budget_violations;
    std::vector<long long> silent_steps;
    std::vector<double> max_filtered_eig;
    std::vector<double> max_fused_eig;
    std::vector<double> min_fused_eig;
};

RunResult simulate_run(const ExperimentConfig& cfg, const std::vector<LfKernel>& schedule,
                       std::uint64_t run) {
    const int nn = cfg.network.num_nodes;
    const int T = cfg.horizon;
    const int nv = static_cast<int>(cfg.variants.size());

    int num_sensors = static_cast<int>(cfg.network.sensors.size());
    int num_comm = nn - num_sensors;

    Rng rng = Rng::substream(cfg.seed, run);
    TrajectorySample traj = sample_trajectory(cfg.model, schedule, rng);

    RunResult res;
    res.mse_t.assign(nv, std::vector<double>(T, 0.0));
    res.mse_node.assign(nv, std::vector<double>(nn, 0.0));
    res.tx_rate.assign(nv, std::vector<double>(T, 0.0));
    res.theta_c.assign(nv, std::vector<double>(T, 0.0));
    res.theta_bar_c.assign(nv, std::vector<double>(T, 0.0));
    res.theta_s.assign(nv, std::vector<double>(T, 0.0));
    res.theta_bar_s.assign(nv, std::vector<double>(T, 0.0));
    res.min_omega_t.assign(nv, std::vector<double>(T, std::numeric_limits<double>::infinity()));
    res.max_budget_used.assign(nv, -1.0);
    res.budget_violations.assign(nv, 0);
    res.silent_steps.assign(nv, 0);
    res.max_filtered_eig.assign(nv, 0.0);
    res.max_fused_eig.assign(nv, 0.0);
    res.min_fused_eig.assign(nv, std::numeric_limits<double>::infinity());

    for (int v = 0; v < nv; ++v) {
        const VariantSpec& spec = cfg.variants[v];
        const double budget = spec.trigger.kl_budget(cfg.model.state_dim());
        DistributedFilter filter(cfg.model, cfg.network, spec.variant, spec.trigger, cfg.solver);

        for (int t = 0; t < T; ++t) {
            auto info = filter.step(split_channels(cfg.model, traj.measurements[t]));

            double sq_sum = 0.0;
            int transmitted = 0;
            for (int i = 0; i < nn; ++i) {
                const NodeState& node = filter.node(i);
                const double sq = (traj.states[t] - node.fused.mean()).squaredNorm();
                sq_sum += sq;
                res.mse_node[v][i] += sq;
                transmitted += info[i].transmitted ? 1 : 0;

                if (node.is_sensor) {
                    res.theta_s[v][t] += info[i].theta;
                    res.theta_bar_s[v][t] += info[i].theta_bar;
                } else {
                    res.theta_c[v][t] += info[i].theta;
                    res.theta_bar_c[v][t] += info[i].theta_bar;
                }

                const double filt_max = max_eig_sym(node.filtered.omega);
                const double fuse_max = max_eig_sym(node.fused.omega);
                const double filt_min = min_eig_sym(node.filtered.omega);
                const double fuse_min = min_eig_sym(node.fused.omega);
                res.max_filtered_eig[v] = std::max(res.max_filtered_eig[v], filt_max);
                res.max_fused_eig[v] = std::max(res.max_fused_eig[v], fuse_max);
                res.min_fused_eig[v] = std::min(res.min_fused_eig[v], fuse_min);
                res.min_omega_t[v][t] = std::min(res.min_omega_t[v][t], filt_min);

                if (!info[i].transmitted) {
                    ++res.silent_steps[v];
                    res.max_budget_used[v] = std::max(res.max_budget_used[v], info[i].budget_used);
                    if (info[i].budget_used > budget + 1e-9) ++res.budget_violations[v];
                }
            }
            res.mse_t[v][t] = sq_sum / nn;
            res.tx_rate[v][t] = static_cast<double>(transmitted) / nn;
            if (num_sensors > 0) {
                res.theta_s[v][t] /= num_sensors;
                res.theta_bar_s[v][t] /= num_sensors;
            }
            if (num_comm > 0) {
                res.theta_c[v][t] /= num_comm;
                res.theta_bar_c[v][t] /= num_comm;
            }
        }
        for (int i = 0; i < nn; ++i) res.mse_node[v][i] /= T;
    }
    return res;
}

}  // namespace

ActualModel ActualModel::least_favorable(double b) {
    if (b < 0.0) throw std::invalid_argument("actual-model tolerance must be nonnegative");
    ActualModel a;
    a.kind = Kind::least_favorable;
    a.b = b;
    return a;
}

void ExperimentConfig::validate() const {
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    if (num_runs < 1) throw std::invalid_argument("num_runs must be at least 1");
    if (variants.empty()) throw std::invalid_argument("at least one variant is required");
    if (threads < 0) throw std::invalid_argument("threads must be nonnegative");
    for (const VariantSpec& v : variants) {
        if (v.name.empty()) throw std::invalid_argument("variant names must be nonempty");
        v.trigger.validate();
    }
    for (std::size_t a = 0; a < variants.size(); ++a) {
        for (std::size_t b = a + 1; b < variants.size(); ++b) {
            if (variants[a].name == variants[b].name) {
                throw std::invalid_argument("duplicate variant name: " + variants[a].name);
            }
        }
    }
    model.validate();
    if (static_cast<int>(model.channels.size()) != static_cast<int>(network.sensors.size())) {
        throw std::invalid_argument("model must supply one channel per sensor node");
    }
}

MetricsReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const double actual_b = config.actual.kind == ActualModel::Kind::least_favorable
                                ? config.actual.b
                                : 0.0;
    // The sampler's covariance side is shared by every run.
    const std::vector<LfKernel> schedule =
        kernel_schedule(config.model, actual_b, config.horizon, config.solver);

    const int runs = config.num_runs;
    std::vector<RunResult> results(runs);
    std::vector<std::string> failures(runs);

    int threads = config.threads;
    if (threads == 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, runs));

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= runs) return;
            try {
                results[r] = simulate_run(config, schedule, static_cast<std::uint64_t>(r));
            } catch (const std::exception& e) {
                failures[r] = e.what();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    for (int r = 0; r < runs; ++r) {
        if (!failures[r].empty()) {
            throw numerical_error("run " + std::to_string(r) + " failed: " + failures[r]);
        }
    }

    const int nv = static_cast<int>(config.variants.size());
    const int T = config.horizon;
    const int nn = config.network.num_nodes;

    MetricsReport report;
    report.horizon = T;
    report.num_runs = runs;
    report.num_nodes = nn;
    report.seed = config.seed;
    {
        DistributedFilter probe(config.model, config.network, config.variants[0].variant,
                                config.variants[0].trigger, config.solver);
        report.omega_bound = probe.omega_bound();
    }

    auto mean_over_runs = [&](auto&& pick) {
        KahanSum acc;
        for (int r = 0; r < runs; ++r) acc.add(pick(results[r]));
        return acc.sum / runs;
    };

    report.variants.resize(nv);
    for (int v = 0; v < nv; ++v) {
        VariantMetrics& m = report.variants[v];
        m.name = config.variants[v].name;
        m.budget = config.variants[v].trigger.kl_budget(config.model.state_dim());
        m.mse_t.resize(T);
        m.rmse_t.resize(T);
        m.tx_rate.resize(T);
        m.theta_c.resize(T);
        m.theta_bar_c.resize(T);
        m.theta_s.resize(T);
        m.theta_bar_s.resize(T);
        m.min_omega_t.resize(T);
        m.mse_node.resize(nn);
        for (int t = 0; t < T; ++t) {
            m.mse_t[t] = mean_over_runs([&](const RunResult& r) { return r.mse_t[v][t]; });
            m.rmse_t[t] = std::sqrt(m.mse_t[t]);
            m.tx_rate[t] = mean_over_runs([&](const RunResult& r) { return r.tx_rate[v][t]; });
            m.theta_c[t] = mean_over_runs([&](const RunResult& r) { return r.theta_c[v][t]; });
            m.theta_bar_c[t] =
                mean_over_runs([&](const RunResult& r) { return r.theta_bar_c[v][t]; });
            m.theta_s[t] = mean_over_runs([&](const RunResult& r) { return r.theta_s[v][t]; });
            m.theta_bar_s[t] =
                mean_over_runs([&](const RunResult& r) { return r.theta_bar_s[v][t]; });
            double lo = std::numeric_limits<double>::infinity();
            for (int r = 0; r < runs; ++r) lo = std::min(lo, results[r].min_omega_t[v][t]);
            m.min_omega_t[t] = lo;
        }
        for (int i = 0; i < nn; ++i) {
            m.mse_node[i] = mean_over_runs([&](const RunResult& r) { return r.mse_node[v][i]; });
        }
        for (int r = 0; r < runs; ++r) {
            const RunResult& rr = results[r];
            m.max_budget_used = std::max(m.max_budget_used, rr.max_budget_used[v]);
            m.budget_violations += rr.budget_violations[v];
            m.silent_steps += rr.silent_steps[v];
            m.max_filtered_eig = std::max(m.max_filtered_eig, rr.max_filtered_eig[v]);
            m.max_fused_eig = std::max(m.max_fused_eig, rr.max_fused_eig[v]);
            m.min_fused_eig = std::min(m.min_fused_eig, rr.min_fused_eig[v]);
        }
    }
    return report;
}

std::vector<VariantSummary> compare_variants(const MetricsReport& report) {
    if (report.variants.size() < 2) {
        throw std::invalid_argument("compare_variants needs at least two variants");
    }
    const int T = report.horizon;
    int start = (4 * T) / 5;
    if (start >= T) start = T - 1;

    std::vector<VariantSummary> table;
    for (const VariantMetrics& m : report.variants) {
        VariantSummary s;
        s.name = m.name;
        KahanSum ss;
        for (int t = start; t < T; ++t) ss.add(m.mse_t[t]);
        s.steady_state_mse = ss.sum / (T - start);
        KahanSum tx;
        for (int t = 0; t < T; ++t) tx.add(m.tx_rate[t]);
        s.mean_tx_rate = tx.sum / T;
        table.push_back(std::move(s));
    }
    std::stable_sort(table.begin(), table.end(),
                     [](const VariantSummary& a, const VariantSummary& b) {
                         return a.steady_state_mse < b.steady_state_mse;
                     });
    return table;
}

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw io_error("failed writing " + path.string());
}

// index column plus one column per (variant, series) pair.
std::string csv_table(const std::string& index_name, int rows,
                      const std::vector<std::pair<std::string, const std::vector<double>*>>& cols) {
    std::string body = index_name;
    for (const auto& [name, values] : cols) body += "," + name;
    body += "\n";
    for (int r = 0; r < rows; ++r) {
        body += std::to_string(r);
        for (const auto& [name, values] : cols) body += "," + fmt((*values)[r]);
        body += "\n";
    }
    return body;
}

}  // namespace

std::string summary_json(const MetricsReport& report) {
    nlohmann::json doc;
    doc["horizon"] = report.horizon;
    doc["num_runs"] = report.num_runs;
    doc["num_nodes"] = report.num_nodes;
    doc["seed"] = report.seed;
    doc["omega_bound"] = report.omega_bound;

    const auto table = report.variants.size() >= 2 ? compare_variants(report)
                                                   : std::vector<VariantSummary>{};
    auto variants = nlohmann::json::array();
    for (const VariantMetrics& m : report.variants) {
        nlohmann::json v;
        v["name"] = m.name;
        v["budget"] = m.budget;
        v["max_budget_used"] = m.max_budget_used;
        v["budget_violations"] = m.budget_violations;
        v["silent_steps"] = m.silent_steps;
        v["max_filtered_eig"] = m.max_filtered_eig;
        v["max_fused_eig"] = m.max_fused_eig;
        v["min_fused_eig"] = m.min_fused_eig;
        v["mse_final"] = m.mse_t.empty() ? 0.0 : m.mse_t.back();
        for (const VariantSummary& s : table) {
            if (s.name == m.name) {
                v["steady_state_mse"] = s.steady_state_mse;
                v["mean_tx_rate"] = s.mean_tx_rate;
            }
        }
        variants.push_back(std::move(v));
    }
    doc["variants"] = variants;
    return doc.dump(2) + "\n";
}

void write_report(const MetricsReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory " + dir + ": " + ec.message());

    using Cols = std::vector<std::pair<std::string, const std::vector<double>*>>;
    Cols mse_cols, node_cols, tx_cols, theta_cols;
    for (const VariantMetrics& m : report.variants) {
        mse_cols.emplace_back(m.name, &m.mse_t);
        node_cols.emplace_back(m.name, &m.mse_node);
        tx_cols.emplace_back(m.name, &m.tx_rate);
        theta_cols.emplace_back(m.name + "_theta_c", &m.theta_c);
        theta_cols.emplace_back(m.name + "_theta_bar_c", &m.theta_bar_c);
        theta_cols.emplace_back(m.name + "_theta_s", &m.theta_s);
        theta_cols.emplace_back(m.name + "_theta_bar_s", &m.theta_bar_s);
    }
    for (const VariantMetrics& m : report.variants) {
        mse_cols.emplace_back(m.name + "_rmse", &m.rmse_t);
    }

    write_file(fs::path(dir) / "mse_t.csv", csv_table("t", report.horizon, mse_cols));
    write_file(fs::path(dir) / "mse_node.csv", csv_table("node", report.num_nodes, node_cols));
    write_file(fs::path(dir) / "tx_rate.csv", csv_table("t", report.horizon, tx_cols));
    write_file(fs::path(dir) / "theta.csv", csv_table("t", report.horizon, theta_cols));
    write_file(fs::path(dir) / "summary.json", summary_json(report));
}

// ============================================================
// Configuration JSON
// ============================================================

namespace {

nlohmann::json mat_to_json(const Mat& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat mat_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
        throw std::invalid_argument(std::string(what) + " must be a nonempty array of rows");
    }
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Mat m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols) {
            throw std::invalid_argument(std::string(what) + " rows must have equal length");
        }
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

nlohmann::json vec_to_json(const Vec& v) {
    auto arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Vec vec_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw std::invalid_argument(std::string(what) + " must be an array");
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

const char* variant_kind_name(FilterVariant::Kind k) {
    switch (k) {
        case FilterVariant::Kind::rdkf: return "rdkf";
        case FilterVariant::Kind::rdkfloc: return "rdkfloc";
        case FilterVariant::Kind::dkf: return "dkf";
    }
    return "rdkf";
}

}  // namespace

std::string experiment_to_json(const ExperimentConfig& config) {
    nlohmann::json doc;

    nlohmann::json model;
    model["A"] = mat_to_json(config.model.A);
    model["B"] = mat_to_json(config.model.B);
    auto channels = nlohmann::json::array();
    for (const SensorChannel& ch : config.model.channels) {
        nlohmann::json c;
        c["C"] = mat_to_json(ch.C);
        c["D"] = mat_to_json(ch.D);
        channels.push_back(std::move(c));
    }
    model["channels"] = channels;
    model["x0_mean"] = vec_to_json(config.model.x0_mean);
    model["V0"] = mat_to_json(config.model.V0);
    doc["model"] = model;

    doc["network"] = nlohmann::json::parse(network_to_json(config.network));

    nlohmann::json actual;
    actual["kind"] =
        config.actual.kind == ActualModel::Kind::nominal ? "nominal" : "least_favorable";
    actual["b"] = config.actual.b;
    doc["actual"] = actual;

    auto variants = nlohmann::json::array();
    for (const VariantSpec& spec : config.variants) {
        nlohmann::json v;
        v["name"] = spec.name;
        v["kind"] = variant_kind_name(spec.variant.kind);
        v["b"] = spec.variant.b;
        if (spec.variant.kind == FilterVariant::Kind::rdkfloc) {
            auto locals = nlohmann::json::array();
            for (const auto& [node, bi] : spec.variant.sensor_b) locals.push_back({node, bi});
            v["sensor_b"] = locals;
            v["b_comm"] = spec.variant.b_comm;
        }
        v["alpha"] = spec.trigger.alpha;
        v["beta"] = spec.trigger.beta;
        v["delta"] = spec.trigger.delta;
        variants.push_back(std::move(v));
    }
    doc["variants"] = variants;

    doc["horizon"] = config.horizon;
    doc["num_runs"] = config.num_runs;
    doc["seed"] = config.seed;
    doc["threads"] = config.threads;
    doc["root_tolerance"] = config.solver.root_tolerance;
    return doc.dump(2) + "\n";
}

ExperimentConfig experiment_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("experiment_from_json: ") + e.what());
    }
    try {
        ExperimentConfig config;
        const nlohmann::json& model = doc.at("model");
        config.model.A = mat_from_json(model.at("A"), "model.A");
        config.model.B = mat_from_json(model.at("B"), "model.B");
        config.model.Q = sym(config.model.B * config.model.B.transpose());
        for (const auto& c : model.at("channels")) {
            SensorChannel ch;
            ch.C = mat_from_json(c.at("C"), "channel.C");
            ch.D = mat_from_json(c.at("D"), "channel.D");
            ch.R = sym(ch.D * ch.D.transpose());
            config.model.channels.push_back(std::move(ch));
        }
        config.model.x0_mean = vec_from_json(model.at("x0_mean"), "model.x0_mean");
        config.model.V0 = mat_from_json(model.at("V0"), "model.V0");

        config.network = network_from_json(doc.at("network").dump());

        const nlohmann::json& actual = doc.at("actual");
        const std::string kind = actual.at("kind").get<std::string>();
        if (kind == "nominal") {
            config.actual = ActualModel::nominal();
        } else if (kind == "least_favorable") {
            config.actual = ActualModel::least_favorable(actual.at("b").get<double>());
        } else {
            throw std::invalid_argument("actual.kind must be nominal or least_favorable");
        }

        for (const auto& v : doc.at("variants")) {
            VariantSpec spec;
            spec.name = v.at("name").get<std::string>();
            const std::string vk = v.at("kind").get<std::string>();
            if (vk == "rdkf") {
                spec.variant = FilterVariant::rdkf(v.at("b").get<double>());
            } else if (vk == "dkf") {
                spec.variant = FilterVariant::dkf();
            } else if (vk == "rdkfloc") {
                std::map<int, double> locals;
                for (const auto& entry : v.at("sensor_b")) {
                    if (!entry.is_array() || entry.size() != 2) {
                        throw std::invalid_argument("sensor_b entries must be [node, b] pairs");
                    }
                    locals[entry[0].get<int>()] = entry[1].get<double>();
                }
                spec.variant = FilterVariant::rdkfloc(v.at("b").get<double>(), std::move(locals),
                                                      v.at("b_comm").get<double>());
            } else {
                throw std::invalid_argument("variant kind must be rdkf, rdkfloc or dkf");
            }
            spec.trigger.alpha = v.at("alpha").get<double>();
            spec.trigger.beta = v.at("beta").get<double>();
            spec.trigger.delta = v.at("delta").get<double>();
            config.variants.push_back(std::move(spec));
        }

        config.horizon = doc.at("horizon").get<int>();
        config.num_runs = doc.at("num_runs").get<int>();
        config.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("threads")) config.threads = doc.at("threads").get<int>();
        if (doc.contains("root_tolerance")) {
            config.solver.root_tolerance = doc.at("root_tolerance").get<double>();
        }
        config.validate();
        return config;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("experiment_from_json: ") + e.what());
    }
}

}  // namespace rdkf
