#pragma once

#include <cstdint>

#include "rdkf/harness.hpp"

namespace rdkf {

// Target-tracking benchmark: a constant-velocity point in 3-D sampled at
// 0.1 s, tracked over a random strongly connected network whose sensor nodes
// measure noisy positions, each blind to one axis.
struct TrackingOptions {
    int num_nodes = 100;
    int num_sensors = 20;
    double density = 0.04;
    int horizon = 250;
    int num_runs = 500;
    std::uint64_t seed = 1;
    double b = 0.05;          // ambiguity radius, also the least-favorable data tolerance
    double noise_scale = 1.0; // k in R^i = sqrt(k) P R0 P^T
    double alpha = 10.0;
    double beta = 0.2;
    double delta = 0.5;
    int threads = 0;
};

// State [v_x v_y v_z p_x p_y p_z]: A = I + 0.1 * (position integrates
// velocity), B = sqrt(0.001) I. Each sensor gets one of the three position
// patterns diag(1,1,0), diag(1,0,1), diag(0,1,1) (never all three axes;
// patterns are redrawn until every axis is covered by someone) and
// R^i = sqrt(noise_scale) P R0 P^T with R0 = 0.5 diag(1,4,7) and a random
// permutation P per sensor. Needs num_sensors >= 2 for collective
// observability.
StateSpaceModel tracking_model(int num_sensors, double noise_scale, Rng& rng);

// Full benchmark configuration: the model above on a random strongly
// connected network, least-favorable data with tolerance b, and four variants:
// RDKF(b), RDKFLOC(b, per-sensor tolerances from the steady state), DKF1
// (alpha as configured) and DKF2 (alpha = 0.01).
ExperimentConfig preset_tracking(const TrackingOptions& opts = {});

}  // namespace rdkf
