#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rdkf/distributed.hpp"
#include "rdkf/least_favorable.hpp"

namespace rdkf {

// Which model generates the data the filters see.
struct ActualModel {
    enum class Kind { nominal, least_favorable };
    Kind kind = Kind::nominal;
    double b = 0.0;

    static ActualModel nominal() { return {}; }
    static ActualModel least_favorable(double b);
};

struct VariantSpec {
    std::string name;
    FilterVariant variant;
    TriggerParams trigger;
};

struct ExperimentConfig {
    StateSpaceModel model;
    SensorNetwork network;
    ActualModel actual;
    std::vector<VariantSpec> variants;
    int horizon = 250;
    int num_runs = 1;
    std::uint64_t seed = 0;
    // Worker threads for the Monte Carlo loop; 0 means all hardware threads.
    // The numbers never depend on this value.
    int threads = 1;
    RobustConfig solver;

    void validate() const;
};

// Every series is averaged over runs; node estimates are the fused pairs.
struct VariantMetrics {
    std::string name;
    std::vector<double> mse_t;  // network-average squared error, as printed
    std::vector<double> rmse_t;
    std::vector<double> mse_node;  // time-average squared error per node
    std::vector<double> tx_rate;
    std::vector<double> theta_c;  // averages over communication nodes
    std::vector<double> theta_bar_c;
    std::vector<double> theta_s;  // averages over sensor nodes
    std::vector<double> theta_bar_s;
    std::vector<double> min_omega_t;  // min filtered precision eigenvalue seen at t

    // Runtime invariant observations, extremes across nodes, steps and runs.
    double budget = 0.0;  // silence budget for this variant's trigger
    double max_budget_used = -1.0;
    long long budget_violations = 0;
    long long silent_steps = 0;
    double max_filtered_eig = 0.0;
    double max_fused_eig = 0.0;
    double min_fused_eig = std::numeric_limits<double>::infinity();
};

struct MetricsReport {
    int horizon = 0;
    int num_runs = 0;
    int num_nodes = 0;
    std::uint64_t seed = 0;
    double omega_bound = 0.0;
    std::vector<VariantMetrics> variants;
};

// Seeded Monte Carlo study. Run r draws its trajectory from
// Rng::substream(config.seed, r); all variants filter the same measurements.
// Per-run results are reduced in run order with compensated summation, so the
// report is byte-identical for any thread count.
MetricsReport run_experiment(const ExperimentConfig& config);

struct VariantSummary {
    std::string name;
    double steady_state_mse = 0.0;  // mean of mse_t over the last fifth
    double mean_tx_rate = 0.0;
};

// Per-variant steady-state table, sorted by steady-state mse ascending.
std::vector<VariantSummary> compare_variants(const MetricsReport& report);

// mse_t.csv, mse_node.csv, tx_rate.csv, theta.csv and summary.json under dir
// (created if missing). Doubles are printed with %.17g so equal reports give
// byte-identical files.
void write_report(const MetricsReport& report, const std::string& dir);

std::string summary_json(const MetricsReport& report);

// JSON round trip for the full experiment configuration.
std::string experiment_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_from_json(const std::string& text);

}  // namespace rdkf
