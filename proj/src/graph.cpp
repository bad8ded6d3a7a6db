#include "rdkf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "rdkf/errors.hpp"

namespace rdkf {

bool SensorNetwork::is_sensor(int i) const {
    return std::binary_search(sensors.begin(), sensors.end(), i);
}

int SensorNetwork::sensor_index(int i) const {
    auto it = std::lower_bound(sensors.begin(), sensors.end(), i);
    if (it == sensors.end() || *it != i) return -1;
    return static_cast<int>(it - sensors.begin());
}

std::vector<std::pair<int, int>> SensorNetwork::edges() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < num_nodes; ++i)
        for (int j : in_neighbors[static_cast<std::size_t>(i)]) out.emplace_back(j, i);
    std::sort(out.begin(), out.end());
    return out;
}

int SensorNetwork::num_edges() const {
    int count = 0;
    for (const auto& nbrs : in_neighbors) count += static_cast<int>(nbrs.size());
    return count;
}

Mat build_consensus(const std::vector<std::pair<int, int>>& edges, int num_nodes) {
    if (num_nodes <= 0) throw std::invalid_argument("build_consensus: num_nodes must be positive");
    std::vector<std::set<int>> in(static_cast<std::size_t>(num_nodes));
    std::vector<bool> self_loop(static_cast<std::size_t>(num_nodes), false);
    for (const auto& [j, i] : edges) {
        if (j < 0 || j >= num_nodes || i < 0 || i >= num_nodes)
            throw std::invalid_argument("build_consensus: edge endpoint out of range");
        if (j == i)
            self_loop[static_cast<std::size_t>(i)] = true;
        else
            in[static_cast<std::size_t>(i)].insert(j);
    }
    for (int i = 0; i < num_nodes; ++i)
        if (!self_loop[static_cast<std::size_t>(i)])
            throw std::invalid_argument("build_consensus: node " + std::to_string(i) +
                                        " is missing its self-loop");

    Mat pi = Mat::Zero(num_nodes, num_nodes);
    for (int i = 0; i < num_nodes; ++i) {
        const auto& nbrs = in[static_cast<std::size_t>(i)];
        double w = 1.0 / (static_cast<double>(nbrs.size()) + 1.0);
        pi(i, i) = w;
        for (int j : nbrs) pi(i, j) = w;
    }
    return pi;
}

SensorNetwork make_network(int num_nodes, std::vector<int> sensors,
                           const std::vector<std::pair<int, int>>& edges) {
    if (num_nodes <= 0) throw std::invalid_argument("make_network: num_nodes must be positive");
    std::sort(sensors.begin(), sensors.end());
    if (std::adjacent_find(sensors.begin(), sensors.end()) != sensors.end())
        throw std::invalid_argument("make_network: duplicate sensor id");
    if (!sensors.empty() && (sensors.front() < 0 || sensors.back() >= num_nodes))
        throw std::invalid_argument("make_network: sensor id out of range");

    SensorNetwork net;
    net.num_nodes = num_nodes;
    net.sensors = std::move(sensors);
    net.in_neighbors.assign(static_cast<std::size_t>(num_nodes), {});

    std::vector<std::set<int>> in(static_cast<std::size_t>(num_nodes));
    std::vector<std::pair<int, int>> full = edges;
    for (const auto& [j, i] : edges) {
        if (j < 0 || j >= num_nodes || i < 0 || i >= num_nodes)
            throw std::invalid_argument("make_network: edge endpoint out of range");
        if (j != i) in[static_cast<std::size_t>(i)].insert(j);
    }
    for (int i = 0; i < num_nodes; ++i) {
        full.emplace_back(i, i);
        net.in_neighbors[static_cast<std::size_t>(i)].assign(in[static_cast<std::size_t>(i)].begin(),
                                                             in[static_cast<std::size_t>(i)].end());
    }
    net.consensus = build_consensus(full, num_nodes);
    return net;
}

SensorNetwork random_strongly_connected(int num_nodes, int num_sensors, double edge_density,
                                        Rng& rng) {
    if (num_nodes <= 0) throw std::invalid_argument("random_strongly_connected: num_nodes must be positive");
    if (num_sensors < 0 || num_sensors > num_nodes)
        throw std::invalid_argument("random_strongly_connected: num_sensors out of range");
    if (edge_density <= 0.0 || edge_density > 1.0)
        throw std::invalid_argument("random_strongly_connected: edge_density must be in (0, 1]");

    const long long possible = static_cast<long long>(num_nodes) * (num_nodes - 1);
    const long long target = std::llround(edge_density * static_cast<double>(possible));
    if (num_nodes > 1 && target < num_nodes)
        throw std::invalid_argument(
            "random_strongly_connected: density target of " + std::to_string(target) +
            " edges is below the " + std::to_string(num_nodes) + "-edge Hamiltonian cycle floor");

    std::vector<std::pair<int, int>> edge_list;
    if (num_nodes > 1) {
        // Random directed Hamiltonian cycle guarantees strong connectivity.
        std::vector<int> order = rng.permutation(num_nodes);
        std::set<std::pair<int, int>> chosen;
        for (int k = 0; k < num_nodes; ++k) {
            int from = order[static_cast<std::size_t>(k)];
            int to = order[static_cast<std::size_t>((k + 1) % num_nodes)];
            chosen.insert({from, to});
        }
        // Fill up to the density target from a shuffled list of the remaining
        // ordered pairs; no rejection loop, so the cost is deterministic.
        std::vector<std::pair<int, int>> rest;
        rest.reserve(static_cast<std::size_t>(possible) - chosen.size());
        for (int j = 0; j < num_nodes; ++j)
            for (int i = 0; i < num_nodes; ++i)
                if (j != i && chosen.find({j, i}) == chosen.end()) rest.emplace_back(j, i);
        std::vector<int> idx = rng.permutation(static_cast<int>(rest.size()));
        long long extra = target - static_cast<long long>(chosen.size());
        for (long long k = 0; k < extra; ++k)
            chosen.insert(rest[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])]);
        edge_list.assign(chosen.begin(), chosen.end());
    }

    std::vector<int> node_perm = rng.permutation(num_nodes);
    std::vector<int> sensors(node_perm.begin(), node_perm.begin() + num_sensors);
    std::sort(sensors.begin(), sensors.end());

    SensorNetwork net = make_network(num_nodes, std::move(sensors), edge_list);
    if (!is_strongly_connected(net))
        throw numerical_error("random_strongly_connected: generated graph is not strongly connected");
    return net;
}

bool is_strongly_connected(const SensorNetwork& net) {
    const int n = net.num_nodes;
    if (n == 0) return false;
    // BFS over in-edges reaches every node that can reach node 0; BFS over
    // out-edges reaches every node reachable from node 0. Both must cover.
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j : net.in_neighbors[static_cast<std::size_t>(i)])
            out[static_cast<std::size_t>(j)].push_back(i);

    auto covers = [n](const std::vector<std::vector<int>>& adj) {
        std::vector<bool> seen(static_cast<std::size_t>(n), false);
        std::vector<int> stack{0};
        seen[0] = true;
        int count = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int w : adj[static_cast<std::size_t>(v)])
                if (!seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = true;
                    ++count;
                    stack.push_back(w);
                }
        }
        return count == n;
    };
    return covers(out) && covers(net.in_neighbors);
}

Vec perron_vector(const Mat& consensus) {
    const int n = static_cast<int>(consensus.rows());
    if (n == 0 || consensus.cols() != n)
        throw std::invalid_argument("perron_vector: consensus matrix must be square");
    Vec p = Vec::Constant(n, 1.0 / n);
    const int max_iter = 200000;
    for (int iter = 0; iter < max_iter; ++iter) {
        Vec next = consensus.transpose() * p;
        next /= next.sum();
        double residual = (consensus.transpose() * next - next).lpNorm<Eigen::Infinity>();
        p = next;
        if (residual < 1e-10) {
            if (p.minCoeff() <= 0.0)
                throw numerical_error("perron_vector: fixed point has a nonpositive component");
            return p;
        }
    }
    throw numerical_error("perron_vector: power iteration did not converge");
}

std::string network_to_json(const SensorNetwork& net) {
    nlohmann::json doc;
    doc["num_nodes"] = net.num_nodes;
    doc["sensors"] = net.sensors;
    auto edges = nlohmann::json::array();
    for (const auto& [j, i] : net.edges()) edges.push_back({j, i});
    doc["edges"] = edges;
    return doc.dump(2);
}

SensorNetwork network_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("network_from_json: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("num_nodes") || !doc.contains("sensors") ||
        !doc.contains("edges"))
        throw std::invalid_argument(
            "network_from_json: document must contain num_nodes, sensors, edges");
    try {
        int num_nodes = doc["num_nodes"].get<int>();
        std::vector<int> sensors = doc["sensors"].get<std::vector<int>>();
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : doc["edges"]) {
            if (!e.is_array() || e.size() != 2)
                throw std::invalid_argument("network_from_json: each edge must be a pair [j, i]");
            edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        return make_network(num_nodes, std::move(sensors), edges);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("network_from_json: ") + e.what());
    }
}

}  // namespace rdkf
