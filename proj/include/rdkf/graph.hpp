#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rdkf/lingauss.hpp"
#include "rdkf/rng.hpp"

namespace rdkf {

// Directed sensor network. An edge (j, i) means node j can transmit to node i;
// every node always has an implicit self-loop. Node ids are 0-based.
struct SensorNetwork {
    int num_nodes = 0;
    std::vector<int> sensors;                    // sorted, unique node ids
    std::vector<std::vector<int>> in_neighbors;  // per node, sorted, self excluded
    Mat consensus;                               // row-stochastic fusion weights

    bool is_sensor(int i) const;
    // Position of node i within `sensors`, or -1 if i is a pure communication node.
    int sensor_index(int i) const;
    // Directed edges (j, i) excluding self-loops, lexicographically sorted.
    std::vector<std::pair<int, int>> edges() const;
    int num_edges() const;
};

// Row-stochastic consensus matrix over in-neighbors plus self: row i puts
// weight 1/(d_i + 1) on each in-neighbor and on i itself, where d_i is the
// in-neighbor count. `edges` must contain every self-loop (i, i) explicitly.
Mat build_consensus(const std::vector<std::pair<int, int>>& edges, int num_nodes);

// Assemble and validate a network from edges given without self-loops.
SensorNetwork make_network(int num_nodes, std::vector<int> sensors,
                           const std::vector<std::pair<int, int>>& edges);

// Random strongly connected digraph: a random directed Hamiltonian cycle is
// planted first, then extra random edges are added until the non-self-loop
// edge count reaches round(density * N(N-1)). The sensor subset is drawn
// uniformly. Deterministic given (parameters, rng state).
SensorNetwork random_strongly_connected(int num_nodes, int num_sensors, double edge_density,
                                        Rng& rng);

bool is_strongly_connected(const SensorNetwork& net);

// Left Perron vector of the consensus matrix: p > 0, sum(p) = 1,
// |p^T Pi - p^T|_inf < 1e-10. Power iteration; diagnostic use.
Vec perron_vector(const Mat& consensus);

// JSON document {num_nodes, sensors:[...], edges:[[j,i],...]}; self-loops are
// implicit and never serialized.
std::string network_to_json(const SensorNetwork& net);
SensorNetwork network_from_json(const std::string& text);

}  // namespace rdkf
