#include "rdkf/preset.hpp"

#include <cmath>
#include <stdexcept>

namespace rdkf {

namespace {

// Axis pairs a sensor can see: {x,y}, {x,z}, {y,z}.
constexpr int kPatterns[3][2] = {{0, 1}, {0, 2}, {1, 2}};

Mat permutation_matrix(const std::vector<int>& p) {
    Mat m = Mat::Zero(p.size(), p.size());
    for (std::size_t i = 0; i < p.size(); ++i) m(static_cast<int>(i), p[i]) = 1.0;
    return m;
}

}  // namespace

StateSpaceModel tracking_model(int num_sensors, double noise_scale, Rng& rng) {
    if (num_sensors < 2) {
        throw std::invalid_argument(
            "tracking_model: at least two sensors are needed to cover all three axes");
    }
    if (!(noise_scale > 0.0)) {
        throw std::invalid_argument("tracking_model: noise_scale must be positive");
    }

    StateSpaceModel model;
    model.A = Mat::Identity(6, 6);
    for (int k = 0; k < 3; ++k) model.A(3 + k, k) = 0.1;
    model.B = std::sqrt(0.001) * Mat::Identity(6, 6);
    model.Q = 0.001 * Mat::Identity(6, 6);
    model.x0_mean = Vec::Zero(6);
    model.V0 = Mat::Identity(6, 6);

    // Redraw until the axes jointly cover x, y and z, otherwise one position
    // coordinate would be invisible to the whole network.
    std::vector<int> pattern(num_sensors);
    for (;;) {
        bool axis[3] = {false, false, false};
        for (int s = 0; s < num_sensors; ++s) {
            pattern[s] = static_cast<int>(rng.uniform_int(3));
            axis[kPatterns[pattern[s]][0]] = true;
            axis[kPatterns[pattern[s]][1]] = true;
        }
        if (axis[0] && axis[1] && axis[2]) break;
    }

    const Vec r0_diag = (Vec(3) << 0.5, 2.0, 3.5).finished();
    for (int s = 0; s < num_sensors; ++s) {
        SensorChannel ch;
        ch.C = Mat::Zero(3, 6);
        ch.C(kPatterns[pattern[s]][0], 3 + kPatterns[pattern[s]][0]) = 1.0;
        ch.C(kPatterns[pattern[s]][1], 3 + kPatterns[pattern[s]][1]) = 1.0;

        const Mat p = permutation_matrix(rng.permutation(3));
        ch.R = std::sqrt(noise_scale) * p * r0_diag.asDiagonal() * p.transpose();
        ch.D = std::pow(noise_scale, 0.25) * p * r0_diag.cwiseSqrt().asDiagonal() * p.transpose();
        model.channels.push_back(std::move(ch));
    }
    model.validate();
    return model;
}

ExperimentConfig preset_tracking(const TrackingOptions& opts) {
    ExperimentConfig config;

    // Fixed side streams; Monte Carlo runs use streams 0 .. num_runs-1.
    Rng net_rng = Rng::substream(opts.seed, 0xffff0001ULL);
    Rng model_rng = Rng::substream(opts.seed, 0xffff0002ULL);

    config.network =
        random_strongly_connected(opts.num_nodes, opts.num_sensors, opts.density, net_rng);
    config.model = tracking_model(opts.num_sensors, opts.noise_scale, model_rng);
    config.actual = ActualModel::least_favorable(opts.b);
    config.horizon = opts.horizon;
    config.num_runs = opts.num_runs;
    config.seed = opts.seed;
    config.threads = opts.threads;

    TriggerParams trigger{opts.alpha, opts.beta, opts.delta};
    TriggerParams eager{0.01, opts.beta, opts.delta};

    SteadyState steady = robust_steady_state(config.model, opts.b);
    std::vector<double> locals = local_tolerances(steady, config.model);
    std::map<int, double> sensor_b;
    for (std::size_t k = 0; k < locals.size(); ++k) {
        sensor_b[config.network.sensors[k]] = locals[k];
    }

    config.variants.push_back({"RDKF", FilterVariant::rdkf(opts.b), trigger});
    config.variants.push_back(
        {"RDKFLOC", FilterVariant::rdkfloc(opts.b, std::move(sensor_b), opts.b), trigger});
    config.variants.push_back({"DKF1", FilterVariant::dkf(), trigger});
    config.variants.push_back({"DKF2", FilterVariant::dkf(), eager});
    return config;
}

}  // namespace rdkf
