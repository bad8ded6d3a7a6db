#include "rdkf/distributed.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "rdkf/errors.hpp"

namespace rdkf {

double TriggerParams::kl_budget(int state_dim) const {
    validate();
    return 0.5 * (alpha + beta * state_dim + state_dim * std::log1p(delta));
}

void TriggerParams::validate() const {
    if (!(alpha > 0.0) || !(beta > 0.0) || !(delta > 0.0)) {
        throw std::invalid_argument("trigger parameters alpha, beta, delta must be positive");
    }
}

FilterVariant FilterVariant::rdkf(double b) {
    if (b < 0.0) throw std::invalid_argument("tolerance b must be nonnegative");
    FilterVariant v;
    v.kind = Kind::rdkf;
    v.b = b;
    return v;
}

FilterVariant FilterVariant::rdkfloc(double b, std::map<int, double> sensor_b, double b_comm) {
    if (b < 0.0 || b_comm < 0.0) throw std::invalid_argument("tolerance b must be nonnegative");
    for (const auto& [node, bi] : sensor_b) {
        if (!(bi >= 0.0)) throw std::invalid_argument("per-sensor tolerance must be nonnegative");
    }
    FilterVariant v;
    v.kind = Kind::rdkfloc;
    v.b = b;
    v.sensor_b = std::move(sensor_b);
    v.b_comm = b_comm;
    return v;
}

FilterVariant FilterVariant::dkf() {
    FilterVariant v;
    v.kind = Kind::dkf;
    return v;
}

double FilterVariant::tolerance_for(int node, bool is_sensor) const {
    switch (kind) {
        case Kind::dkf:
            return 0.0;
        case Kind::rdkf:
            return b;
        case Kind::rdkfloc:
            if (is_sensor) {
                auto it = sensor_b.find(node);
                if (it == sensor_b.end()) {
                    throw std::invalid_argument("rdkfloc: sensor node " + std::to_string(node) +
                                                " has no local tolerance");
                }
                return it->second;
            }
            return b_comm;
    }
    throw std::invalid_argument("unknown filter variant");
}

bool should_transmit(const GaussianInfo& filtered, const GaussianInfo& bar,
                     const TriggerParams& trigger) {
    // Loewner checks tolerate -1e-10 so discretization noise does not flip the
    // decision at the boundary.
    const Vec d = filtered.mean() - bar.mean();
    const double maha = d.dot(filtered.omega * d);
    if (maha > trigger.alpha) return true;
    if (!psd_leq(filtered.omega / (1.0 + trigger.beta), bar.omega)) return true;
    if (!psd_leq(bar.omega, (1.0 + trigger.delta) * filtered.omega)) return true;
    return false;
}

GaussianInfo fuse_pairs(int self, const GaussianInfo& own, const std::vector<int>& in_neighbors,
                        const std::map<int, GaussianInfo>& transmitted,
                        const std::map<int, GaussianInfo>& bars, const Mat& consensus,
                        double delta) {
    GaussianInfo fused;
    fused.q = consensus(self, self) * own.q;
    fused.omega = consensus(self, self) * own.omega;
    for (int j : in_neighbors) {
        const double pi = consensus(self, j);
        if (auto it = transmitted.find(j); it != transmitted.end()) {
            fused.q += pi * it->second.q;
            fused.omega += pi * it->second.omega;
        } else if (auto bt = bars.find(j); bt != bars.end()) {
            const double shrink = 1.0 / (1.0 + delta);
            fused.q += pi * shrink * bt->second.q;
            fused.omega += pi * shrink * bt->second.omega;
        } else {
            throw protocol_error("node " + std::to_string(self) + " has no pair for silent " +
                                 "in-neighbor " + std::to_string(j));
        }
    }
    fused.omega = sym(fused.omega);
    return fused;
}

DistributedFilter::DistributedFilter(StateSpaceModel model, SensorNetwork network,
                                     FilterVariant variant, TriggerParams trigger, RobustConfig cfg)
    : model_(std::move(model)),
      network_(std::move(network)),
      variant_(std::move(variant)),
      trigger_(trigger),
      cfg_(cfg) {
    trigger_.validate();
    if (static_cast<int>(model_.channels.size()) != static_cast<int>(network_.sensors.size())) {
        throw std::invalid_argument("model must supply one channel per sensor node");
    }
    const GaussianInfo init = to_info({model_.x0_mean, model_.V0});
    nodes_.resize(network_.num_nodes);
    tolerance_.resize(network_.num_nodes);
    for (int i = 0; i < network_.num_nodes; ++i) {
        NodeState& n = nodes_[i];
        n.id = i;
        n.is_sensor = network_.is_sensor(i);
        n.predicted = init;
        n.filtered = init;
        n.fused = init;
        tolerance_[i] = variant_.tolerance_for(i, n.is_sensor);
    }
}

std::vector<NodeStepInfo> DistributedFilter::step(const std::vector<Vec>& measurements) {
    const int nn = network_.num_nodes;
    if (measurements.size() != model_.channels.size()) {
        throw std::invalid_argument("expected one measurement per sensor channel");
    }
    for (std::size_t k = 0; k < measurements.size(); ++k) {
        if (measurements[k].size() != model_.channels[k].C.rows()) {
            throw std::invalid_argument("measurement dimension mismatch on channel " +
                                        std::to_string(k));
        }
    }

    // Correct. Communication nodes carry the prediction through unchanged.
    for (NodeState& n : nodes_) {
        if (n.is_sensor) {
            const int k = network_.sensor_index(n.id);
            const SensorChannel& ch = model_.channels[k];
            n.filtered = robust_correct(n.predicted, ch.C, ch.R, measurements[k]);
        } else {
            n.filtered = n.predicted;
        }
    }

    // Decide. Round zero always transmits; afterwards silence requires the bar
    // pair to pass the trigger. The budget actually consumed by a silent node
    // is recorded now, before the bar pairs are advanced.
    std::vector<NodeStepInfo> info(nn);
    std::vector<int> c(nn, 1);
    for (int i = 0; i < nn; ++i) {
        NodeState& n = nodes_[i];
        info[i].node = i;
        if (t_ > 0) {
            const GaussianInfo& bar = n.bar.at(i);
            c[i] = should_transmit(n.filtered, bar, trigger_) ? 1 : 0;
            if (c[i] == 0) info[i].budget_used = kl_divergence(bar, n.filtered);
        }
        info[i].transmitted = c[i] == 1;
        n.steps_since_transmit = c[i] == 1 ? 0 : n.steps_since_transmit + 1;
    }

    // Exchange and fuse. Transmitted pairs are read straight from the sender's
    // state; silent in-neighbors are replaced by the local bar pair, shrunk.
    std::vector<GaussianInfo> fused(nn);
    for (int i = 0; i < nn; ++i) {
        std::map<int, GaussianInfo> transmitted;
        std::map<int, GaussianInfo> bars;
        for (int j : network_.in_neighbors[i]) {
            if (c[j] == 1) {
                transmitted.emplace(j, nodes_[j].filtered);
            } else if (auto it = nodes_[i].bar.find(j); it != nodes_[i].bar.end()) {
                bars.emplace(j, it->second);
            }
        }
        fused[i] = fuse_pairs(i, nodes_[i].filtered, network_.in_neighbors[i], transmitted, bars,
                              network_.consensus, trigger_.delta);
    }

    // Predict from the fused pair.
    for (int i = 0; i < nn; ++i) {
        nodes_[i].fused = fused[i];
        RobustPrediction rp = robust_predict(fused[i], model_.A, model_.Q, tolerance_[i], cfg_);
        nodes_[i].predicted = rp.pred;
        nodes_[i].theta = rp.theta;
        info[i].theta = rp.theta;
    }

    // Propagate the bar pairs. Every interested node recomputes node j's pair
    // from identical inputs with identical arithmetic, so the copies stay
    // bit-identical without any central storage.
    std::vector<std::map<int, GaussianInfo>> next_bar(nn);
    for (int i = 0; i < nn; ++i) {
        std::vector<int> tracked = network_.in_neighbors[i];
        tracked.push_back(i);
        for (int j : tracked) {
            const GaussianInfo* fallback = nullptr;
            if (c[j] == 0) {
                auto it = nodes_[i].bar.find(j);
                if (it == nodes_[i].bar.end()) {
                    throw protocol_error("node " + std::to_string(i) + " cannot advance the pair " +
                                         "of silent node " + std::to_string(j));
                }
                fallback = &it->second;
            }
            const GaussianInfo& breve = c[j] == 1 ? nodes_[j].filtered : *fallback;
            RobustPrediction rp = robust_predict(breve, model_.A, model_.Q, tolerance_[j], cfg_);
            next_bar[i].emplace(j, std::move(rp.pred));
            if (j == i) {
                nodes_[i].theta_bar = rp.theta;
                info[i].theta_bar = rp.theta;
            }
        }
    }
    for (int i = 0; i < nn; ++i) {
        nodes_[i].bar = std::move(next_bar[i]);
        nodes_[i].last_c.clear();
        for (int j : network_.in_neighbors[i]) nodes_[i].last_c[j] = c[j];
        nodes_[i].last_c[i] = c[i];
    }

    ++t_;
    return info;
}

double DistributedFilter::omega_bound() const {
    const Mat q_inv = spd_inverse(model_.Q);
    double bound = max_eig_sym(sym(q_inv));
    for (const SensorChannel& ch : model_.channels) {
        const Mat m = sym(q_inv + ch.C.transpose() * spd_inverse(ch.R) * ch.C);
        bound = std::max(bound, max_eig_sym(m));
    }
    return bound;
}

}  // namespace rdkf
