#include <algorithm>
#include <set>

#include "flexpipe/errors.hpp"
#include "flexpipe/recipe/recipe.hpp"

namespace flexpipe::recipe {

namespace {

struct Checker {
    const PipelineRecipe& r;
    const KernelRegistry& registry;
    std::vector<Violation> violations;

    void add(std::string path, std::string message) {
        violations.push_back({std::move(path), std::move(message)});
    }

    std::string kpath(std::size_t i) const { return "kernels[" + std::to_string(i) + "]"; }

    const RecipeKernel* find_kernel(const std::string& id) const {
        for (const auto& k : r.kernels)
            if (k.id == id) return &k;
        return nullptr;
    }
};

} // namespace

PipelineMetadata validate(const PipelineRecipe& r, const KernelRegistry& registry) {
    Checker c{r, registry, {}};
    PipelineMetadata meta;

    if (r.kernels.empty()) c.add("kernels", "at least one kernel is required");

    // Instance ids unique; types known; params accepted by the kernel type.
    std::set<std::string> ids;
    for (std::size_t i = 0; i < r.kernels.size(); ++i) {
        const auto& k = r.kernels[i];
        if (k.id.empty()) c.add(c.kpath(i) + ".id", "id must not be empty");
        if (!ids.insert(k.id).second) c.add(c.kpath(i) + ".id", "duplicate instance id " + k.id);
        if (!registry.has(k.kernel_type)) {
            c.add(c.kpath(i) + ".kernel", "unknown kernel type " + k.kernel_type);
            continue;
        }
        try {
            auto probe = registry.create(k.kernel_type, k.id, k.params);
            if (k.frequency) probe->set_frequency(*k.frequency);
        } catch (const ConfigError& e) {
            c.add(c.kpath(i) + ".params", e.what());
        }
    }
    if (!c.violations.empty()) throw RecipeInvalid(std::move(c.violations));

    // Placements reference known kernels.
    for (const auto& [id, host] : r.placements) {
        if (!c.find_kernel(id)) c.add("placements." + id, "unknown kernel id");
        if (host.empty()) c.add("placements." + id, "host label must not be empty");
    }
    auto host_of = [&](const std::string& id) {
        auto it = r.placements.find(id);
        return it == r.placements.end() ? std::string(kLocalHost) : it->second;
    };

    // Per-kernel port entries against the registered descriptor.
    for (std::size_t i = 0; i < r.kernels.size(); ++i) {
        const auto& k = r.kernels[i];
        const auto& desc = registry.descriptor(k.kernel_type);

        std::set<std::string> seen_inputs;
        for (std::size_t j = 0; j < k.input.size(); ++j) {
            const auto& in = k.input[j];
            const std::string path = c.kpath(i) + ".input[" + std::to_string(j) + "]";
            if (!desc.find_in(in.port_name)) {
                c.add(path, "unregistered port " + in.port_name);
                continue;
            }
            if (!seen_inputs.insert(in.port_name).second)
                c.add(path, "duplicate entry for input " + in.port_name);
        }

        std::set<std::string> declared_outputs; // registered tags and branch names so far
        for (std::size_t j = 0; j < k.output.size(); ++j) {
            const auto& out = k.output[j];
            const std::string path = c.kpath(i) + ".output[" + std::to_string(j) + "]";
            if (out.branched_from) {
                if (!desc.has_out(*out.branched_from))
                    c.add(path + ".branched_from",
                          "branched_from must name a registered output, got " +
                              *out.branched_from);
                if (desc.has_out(out.port_name))
                    c.add(path, "branch name collides with registered output " + out.port_name);
            } else if (!desc.has_out(out.port_name)) {
                c.add(path, "unregistered port " + out.port_name);
                continue;
            }
            if (!declared_outputs.insert(out.port_name).second)
                c.add(path, "duplicate entry for output " + out.port_name);
            if (out.connection_type == ConnType::remote && out.semantics)
                c.add(path + ".semantics",
                      "send semantics are implied for remote outputs (reliable streams "
                      "block on the socket, datagrams never do)");
        }
    }

    // Local connections resolve, respect single-producer single-consumer.
    std::set<std::string> consumed_inputs;   // "id.port"
    std::set<std::string> producing_outputs; // "id.port"
    for (std::size_t e = 0; e < r.local_connections.size(); ++e) {
        const auto& edge = r.local_connections[e];
        const std::string path = "local_connections[" + std::to_string(e) + "]";

        const auto* sk = c.find_kernel(edge.send_kernel);
        const auto* rk = c.find_kernel(edge.recv_kernel);
        if (!sk) c.add(path + ".send_kernel", "unknown kernel " + edge.send_kernel);
        if (!rk) c.add(path + ".recv_kernel", "unknown kernel " + edge.recv_kernel);
        if (!sk || !rk) continue;

        const auto& sdesc = registry.descriptor(sk->kernel_type);
        bool sender_is_branch = false;
        for (const auto& out : sk->output)
            if (out.branched_from && out.port_name == edge.send_port_name)
                sender_is_branch = true;
        if (!sdesc.has_out(edge.send_port_name) && !sender_is_branch)
            c.add(path + ".send_port_name",
                  edge.send_kernel + " has no output or branch named " + edge.send_port_name);

        const auto& rdesc = registry.descriptor(rk->kernel_type);
        if (!rdesc.find_in(edge.recv_port_name))
            c.add(path + ".recv_port_name",
                  edge.recv_kernel + " has no input named " + edge.recv_port_name);

        if (!producing_outputs.insert(edge.send_kernel + "." + edge.send_port_name).second)
            c.add(path, "output " + edge.send_kernel + "." + edge.send_port_name +
                            " already feeds another connection; branch it instead");
        if (!consumed_inputs.insert(edge.recv_kernel + "." + edge.recv_port_name).second)
            c.add(path, "input " + edge.recv_kernel + "." + edge.recv_port_name +
                            " already has an incoming connection");

        if (host_of(edge.send_kernel) != host_of(edge.recv_kernel))
            c.add(path, "local connection crosses hosts " + host_of(edge.send_kernel) + " and " +
                            host_of(edge.recv_kernel) + "; declare a remote edge instead");

        // A local input entry, when present, must agree.
        for (const auto& in : rk->input)
            if (in.port_name == edge.recv_port_name && in.connection_type == ConnType::remote)
                c.add(path, "input " + edge.recv_kernel + "." + edge.recv_port_name +
                                " is declared remote but wired locally");
    }

    // Remote listen-port collisions per host.
    std::set<std::tuple<std::string, std::string, std::uint16_t>> listeners; // host, proto, port
    for (std::size_t i = 0; i < r.kernels.size(); ++i) {
        const auto& k = r.kernels[i];
        for (std::size_t j = 0; j < k.input.size(); ++j) {
            const auto& in = k.input[j];
            if (in.connection_type != ConnType::remote) continue;
            const auto key = std::make_tuple(host_of(k.id), to_string(*in.protocol),
                                             *in.listen_port);
            if (!listeners.insert(key).second)
                c.add(c.kpath(i) + ".input[" + std::to_string(j) + "].remote_info",
                      "listen port " + std::to_string(*in.listen_port) + "/" +
                          to_string(*in.protocol) + " already used on host " + host_of(k.id));
        }
    }

    // Assemble plans; flag hard dependencies left unconnected and outputs
    // without a destination.
    for (std::size_t i = 0; i < r.kernels.size(); ++i) {
        const auto& k = r.kernels[i];
        const auto& desc = registry.descriptor(k.kernel_type);

        KernelPlan plan;
        plan.kernel_type = k.kernel_type;
        plan.id = k.id;
        plan.frequency = k.frequency;
        plan.params = k.params;
        plan.host = host_of(k.id);

        for (const auto& spec : desc.in_ports) {
            PortPlan pp;
            pp.tag = spec.tag;
            pp.semantics = spec.semantics; // receive semantics fixed by the developer

            const RecipeInput* entry = nullptr;
            for (const auto& in : k.input)
                if (in.port_name == spec.tag) entry = &in;

            if (entry && entry->connection_type == ConnType::remote) {
                pp.kind = entry->protocol == Protocol::rtp ? ConnKind::remote_datagram
                                                           : ConnKind::remote_reliable;
                pp.protocol = *entry->protocol;
                pp.port = *entry->listen_port;
                pp.queue_capacity = entry->queue_size.value_or(
                    pp.kind == ConnKind::remote_datagram ? kDefaultDatagramInputQueue
                                                         : kDefaultReliableInputQueue);
            } else {
                // Local or unmentioned: look for a local connection edge.
                int edge_idx = -1;
                for (std::size_t e = 0; e < r.local_connections.size(); ++e)
                    if (r.local_connections[e].recv_kernel == k.id &&
                        r.local_connections[e].recv_port_name == spec.tag)
                        edge_idx = static_cast<int>(e);
                if (edge_idx >= 0) {
                    pp.kind = ConnKind::local;
                    pp.local_edge = edge_idx;
                    pp.queue_capacity =
                        r.local_connections[static_cast<std::size_t>(edge_idx)].queue_size.value_or(
                            kDefaultQueueSize);
                    if (entry && entry->queue_size) pp.queue_capacity = *entry->queue_size;
                } else if (entry) {
                    c.add(c.kpath(i), "input " + spec.tag +
                                          " is declared local but no local_connection wires it");
                } else if (spec.semantics == PortSemantics::blocking) {
                    c.add(c.kpath(i), "hard dependency unconnected: blocking input " + spec.tag +
                                          " of " + k.id + " has no connection");
                } else {
                    pp.kind = ConnKind::unconnected; // optional input, reads return absent
                }
            }
            plan.inputs.push_back(std::move(pp));
        }

        for (const auto& tag : desc.out_ports) {
            PortPlan pp;
            pp.tag = tag;

            const RecipeOutput* entry = nullptr;
            for (const auto& out : k.output)
                if (!out.branched_from && out.port_name == tag) entry = &out;

            int edge_idx = -1;
            for (std::size_t e = 0; e < r.local_connections.size(); ++e)
                if (r.local_connections[e].send_kernel == k.id &&
                    r.local_connections[e].send_port_name == tag)
                    edge_idx = static_cast<int>(e);

            if (entry && entry->connection_type == ConnType::remote) {
                pp.kind = entry->protocol == Protocol::rtp ? ConnKind::remote_datagram
                                                           : ConnKind::remote_reliable;
                pp.protocol = *entry->protocol;
                pp.host = *entry->remote_host;
                pp.port = *entry->remote_port;
                // Reliable streams apply socket backpressure; datagrams never wait.
                pp.semantics = pp.kind == ConnKind::remote_reliable ? PortSemantics::blocking
                                                                    : PortSemantics::non_blocking;
            } else if (edge_idx >= 0) {
                pp.kind = ConnKind::local;
                pp.local_edge = edge_idx;
                pp.semantics = entry && entry->semantics ? *entry->semantics
                                                         : PortSemantics::blocking;
                pp.queue_capacity =
                    r.local_connections[static_cast<std::size_t>(edge_idx)].queue_size.value_or(
                        kDefaultQueueSize);
            } else {
                c.add(c.kpath(i),
                      "output " + tag + " of " + k.id + " has no connection or branch target");
                continue;
            }
            plan.outputs.push_back(std::move(pp));
        }

        // Branches declared on this kernel entry.
        for (const auto& out : k.output) {
            if (!out.branched_from) continue;
            PortPlan pp;
            pp.tag = out.port_name;
            pp.branched_from = out.branched_from;

            if (out.connection_type == ConnType::remote) {
                pp.kind = out.protocol == Protocol::rtp ? ConnKind::remote_datagram
                                                        : ConnKind::remote_reliable;
                pp.protocol = *out.protocol;
                pp.host = *out.remote_host;
                pp.port = *out.remote_port;
                pp.semantics = pp.kind == ConnKind::remote_reliable ? PortSemantics::blocking
                                                                    : PortSemantics::non_blocking;
            } else {
                int edge_idx = -1;
                for (std::size_t e = 0; e < r.local_connections.size(); ++e)
                    if (r.local_connections[e].send_kernel == k.id &&
                        r.local_connections[e].send_port_name == out.port_name)
                        edge_idx = static_cast<int>(e);
                if (edge_idx < 0) {
                    c.add(c.kpath(i), "branch " + out.port_name +
                                          " has no local_connection wiring it");
                    continue;
                }
                pp.kind = ConnKind::local;
                pp.local_edge = edge_idx;
                pp.semantics = out.semantics.value_or(PortSemantics::blocking);
                pp.queue_capacity =
                    r.local_connections[static_cast<std::size_t>(edge_idx)].queue_size.value_or(
                        kDefaultQueueSize);
            }
            plan.outputs.push_back(std::move(pp));
        }

        meta.kernels.push_back(std::move(plan));
    }

    if (!c.violations.empty()) throw RecipeInvalid(std::move(c.violations));

    // Local edges carry their capacities.
    for (const auto& edge : r.local_connections)
        meta.local_edges.push_back({edge.send_kernel, edge.send_port_name, edge.recv_kernel,
                                    edge.recv_port_name,
                                    edge.queue_size.value_or(kDefaultQueueSize)});

    // Pair remote outputs with remote inputs on (protocol, port); unmatched
    // ends are legitimate (external peers) and keep one side empty.
    struct RemoteIn {
        std::string kernel, port_tag;
        Protocol protocol;
        std::uint16_t port;
    };
    std::vector<RemoteIn> rins;
    for (const auto& k : meta.kernels)
        for (const auto& in : k.inputs)
            if (in.kind == ConnKind::remote_reliable || in.kind == ConnKind::remote_datagram)
                rins.push_back({k.id, in.tag, in.protocol, in.port});

    std::set<std::size_t> matched;
    for (const auto& k : meta.kernels) {
        for (const auto& out : k.outputs) {
            if (out.kind != ConnKind::remote_reliable && out.kind != ConnKind::remote_datagram)
                continue;
            RemoteEdge edge;
            edge.send_kernel = k.id;
            edge.send_port = out.tag;
            edge.protocol = out.protocol;
            edge.port = out.port;
            for (std::size_t i = 0; i < rins.size(); ++i) {
                if (matched.count(i)) continue;
                if (rins[i].protocol == out.protocol && rins[i].port == out.port) {
                    edge.recv_kernel = rins[i].kernel;
                    edge.recv_port = rins[i].port_tag;
                    matched.insert(i);
                    break;
                }
            }
            meta.remote_edges.push_back(std::move(edge));
        }
    }
    for (std::size_t i = 0; i < rins.size(); ++i) {
        if (matched.count(i)) continue;
        RemoteEdge edge;
        edge.recv_kernel = rins[i].kernel;
        edge.recv_port = rins[i].port_tag;
        edge.protocol = rins[i].protocol;
        edge.port = rins[i].port;
        meta.remote_edges.push_back(std::move(edge));
    }

    return meta;
}

std::map<std::string, PipelineRecipe> split_recipe(const PipelineRecipe& r) {
    auto host_of = [&](const std::string& id) {
        auto it = r.placements.find(id);
        return it == r.placements.end() ? std::string(kLocalHost) : it->second;
    };

    // Cross-host edges must already be remote.
    for (std::size_t e = 0; e < r.local_connections.size(); ++e) {
        const auto& edge = r.local_connections[e];
        if (host_of(edge.send_kernel) != host_of(edge.recv_kernel))
            throw ConfigError("split: local_connections[" + std::to_string(e) + "]: " +
                              edge.send_kernel + " and " + edge.recv_kernel +
                              " are placed on different hosts but connected locally");
    }

    std::map<std::string, PipelineRecipe> parts;
    for (const auto& k : r.kernels) parts[host_of(k.id)].kernels.push_back(k);
    for (const auto& edge : r.local_connections)
        parts[host_of(edge.send_kernel)].local_connections.push_back(edge);
    return parts;
}

} // namespace flexpipe::recipe
