#pragma once

#include <map>
#include <vector>

#include "rdkf/graph.hpp"
#include "rdkf/robust_filter.hpp"

namespace rdkf {

struct TriggerParams {
    double alpha = 10.0;
    double beta = 0.2;
    double delta = 0.5;

    // A silent node's belief differs from its reconstructed pair by at most
    // this many nats.
    double kl_budget(int state_dim) const;
    void validate() const;
};

struct FilterVariant {
    enum class Kind { rdkf, rdkfloc, dkf };
    Kind kind = Kind::rdkf;
    double b = 0.0;
    std::map<int, double> sensor_b;  // node id -> tolerance (rdkfloc, sensor nodes)
    double b_comm = 0.0;             // rdkfloc tolerance elsewhere

    static FilterVariant rdkf(double b);
    static FilterVariant rdkfloc(double b, std::map<int, double> sensor_b, double b_comm);
    static FilterVariant dkf();

    double tolerance_for(int node, bool is_sensor) const;
};

struct NodeState {
    int id = -1;
    bool is_sensor = false;
    GaussianInfo predicted;  // (q_{t|t-1}, Psi)
    GaussianInfo filtered;   // (q_{t|t}, Omega)
    GaussianInfo fused;
    std::map<int, GaussianInfo> bar;  // propagated pairs for self and in-neighbors
    std::map<int, int> last_c;
    double theta = 0.0;
    double theta_bar = 0.0;
    int steps_since_transmit = 0;
};

// Transmission rule for t >= 1: stay silent only if the reconstructed pair is
// close in mean (Mahalanobis w.r.t. the filtered precision) and sandwiched in
// precision between (1+beta)^-1 and (1+delta) times the filtered one.
bool should_transmit(const GaussianInfo& filtered, const GaussianInfo& bar,
                     const TriggerParams& trigger);

// Convex information fusion: own filtered pair plus, per in-neighbor, either
// the transmitted pair or the locally reconstructed bar pair shrunk by
// 1/(1+delta). Missing data for a silent neighbor is a protocol violation.
GaussianInfo fuse_pairs(int self, const GaussianInfo& own, const std::vector<int>& in_neighbors,
                        const std::map<int, GaussianInfo>& transmitted,
                        const std::map<int, GaussianInfo>& bars, const Mat& consensus,
                        double delta);

struct NodeStepInfo {
    int node = -1;
    bool transmitted = false;
    double theta = 0.0;
    double theta_bar = 0.0;
    double budget_used = -1.0;  // KL(bar || filtered) when silent, -1 otherwise
};

// One synchronous round per step: correct, decide, exchange, fuse, predict,
// propagate the bar pairs. Nodes are pure state; phases are barriers.
class DistributedFilter {
  public:
    DistributedFilter(StateSpaceModel model, SensorNetwork network, FilterVariant variant,
                      TriggerParams trigger, RobustConfig cfg = {});

    // One measurement per sensor channel, ordered like network.sensors.
    std::vector<NodeStepInfo> step(const std::vector<Vec>& measurements);

    int time() const { return t_; }
    int num_nodes() const { return network_.num_nodes; }
    const NodeState& node(int i) const { return nodes_.at(i); }
    Vec estimate(int i) const { return nodes_.at(i).fused.mean(); }

    const SensorNetwork& network() const { return network_; }
    const StateSpaceModel& model() const { return model_; }
    const TriggerParams& trigger() const { return trigger_; }

    // max over channels of the largest eigenvalue of Q^-1 + C^T R^-1 C; every
    // filtered and fused precision stays below this from the first predicted
    // step on (round zero still carries the initial pair V0^-1).
    double omega_bound() const;

  private:
    StateSpaceModel model_;
    SensorNetwork network_;
    FilterVariant variant_;
    TriggerParams trigger_;
    RobustConfig cfg_;
    std::vector<NodeState> nodes_;
    std::vector<double> tolerance_;  // per node
    int t_ = 0;
};

}  // namespace rdkf
