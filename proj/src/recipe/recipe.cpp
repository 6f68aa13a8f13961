#include "flexpipe/recipe/recipe.hpp"

#include <yaml-cpp/yaml.h>

#include <regex>
#include <sstream>

#include "flexpipe/errors.hpp"

namespace flexpipe::recipe {

std::string to_string(Protocol p) { return p == Protocol::tcp ? "TCP" : "RTP"; }
std::string to_string(ConnType c) { return c == ConnType::local ? "local" : "remote"; }

namespace {

[[noreturn]] void fail(const std::string& path, const YAML::Node& node, const std::string& msg) {
    std::string where = path;
    if (node.IsDefined() && node.Mark().line >= 0)
        where += " (line " + std::to_string(node.Mark().line + 1) + ")";
    throw ConfigError("recipe: " + where + ": " + msg);
}

void require_keys(const YAML::Node& map, const std::string& path,
                  std::initializer_list<const char*> allowed) {
    for (const auto& kv : map) {
        const std::string key = kv.first.as<std::string>();
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok) fail(path + "." + key, kv.first, "unknown key");
    }
}

std::string scalar(const YAML::Node& node, const std::string& path) {
    if (!node || !node.IsScalar()) fail(path, node, "expected a scalar");
    return node.as<std::string>();
}

bool looks_int(const std::string& s) {
    static const std::regex re(R"(^[+-]?\d+$)");
    return std::regex_match(s, re);
}

bool looks_double(const std::string& s) {
    static const std::regex re(R"(^[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?$)");
    return std::regex_match(s, re) && s.find_first_of(".eE") != std::string::npos;
}

ParamValue parse_param(const YAML::Node& node, const std::string& path) {
    if (!node.IsScalar()) fail(path, node, "params must be scalar values");
    const std::string s = node.as<std::string>();
    if (s == "true") return true;
    if (s == "false") return false;
    if (looks_int(s)) return static_cast<std::int64_t>(std::stoll(s));
    if (looks_double(s)) return std::stod(s);
    return s;
}

std::uint16_t parse_port(const YAML::Node& node, const std::string& path) {
    const std::string s = scalar(node, path);
    if (!looks_int(s)) fail(path, node, "port must be an integer");
    const long long v = std::stoll(s);
    if (v < 1 || v > 65535) fail(path, node, "port must be within 1..65535");
    return static_cast<std::uint16_t>(v);
}

Protocol parse_protocol(const YAML::Node& node, const std::string& path) {
    const std::string s = scalar(node, path);
    if (s == "TCP" || s == "tcp") return Protocol::tcp;
    if (s == "RTP" || s == "rtp") return Protocol::rtp;
    fail(path, node, "protocol must be TCP or RTP");
}

std::size_t parse_queue_size(const YAML::Node& node, const std::string& path) {
    const std::string s = scalar(node, path);
    if (!looks_int(s)) fail(path, node, "queue_size must be an integer");
    const long long v = std::stoll(s);
    if (v < 1) fail(path, node, "queue_size must be >= 1");
    return static_cast<std::size_t>(v);
}

RecipeInput parse_input(const YAML::Node& node, const std::string& path) {
    if (!node.IsMap()) fail(path, node, "expected a map");
    require_keys(node, path, {"port_name", "connection_type", "remote_info", "queue_size"});
    RecipeInput in;
    in.port_name = scalar(node["port_name"], path + ".port_name");
    const std::string ct = scalar(node["connection_type"], path + ".connection_type");
    if (ct == "local")
        in.connection_type = ConnType::local;
    else if (ct == "remote")
        in.connection_type = ConnType::remote;
    else
        fail(path + ".connection_type", node["connection_type"], "must be local or remote");

    if (node["queue_size"]) in.queue_size = parse_queue_size(node["queue_size"], path + ".queue_size");

    if (in.connection_type == ConnType::remote) {
        const auto ri = node["remote_info"];
        if (!ri || !ri.IsSequence() || ri.size() != 2)
            fail(path + ".remote_info", ri, "remote input needs [protocol, listen_port]");
        in.protocol = parse_protocol(ri[0], path + ".remote_info[0]");
        in.listen_port = parse_port(ri[1], path + ".remote_info[1]");
    } else if (node["remote_info"]) {
        fail(path + ".remote_info", node["remote_info"], "remote_info on a local input");
    }
    return in;
}

RecipeOutput parse_output(const YAML::Node& node, const std::string& path) {
    if (!node.IsMap()) fail(path, node, "expected a map");
    require_keys(node, path,
                 {"port_name", "connection_type", "semantics", "remote_info", "branched_from"});
    RecipeOutput out;
    out.port_name = scalar(node["port_name"], path + ".port_name");
    const std::string ct = scalar(node["connection_type"], path + ".connection_type");
    if (ct == "local")
        out.connection_type = ConnType::local;
    else if (ct == "remote")
        out.connection_type = ConnType::remote;
    else
        fail(path + ".connection_type", node["connection_type"], "must be local or remote");

    if (node["semantics"]) {
        const std::string s = scalar(node["semantics"], path + ".semantics");
        if (s == "blocking")
            out.semantics = PortSemantics::blocking;
        else if (s == "nonblocking" || s == "non_blocking")
            out.semantics = PortSemantics::non_blocking;
        else
            fail(path + ".semantics", node["semantics"], "must be blocking or nonblocking");
    }

    if (out.connection_type == ConnType::remote) {
        const auto ri = node["remote_info"];
        if (!ri || !ri.IsSequence() || ri.size() != 3)
            fail(path + ".remote_info", ri, "remote output needs [host, port, protocol]");
        out.remote_host = scalar(ri[0], path + ".remote_info[0]");
        out.remote_port = parse_port(ri[1], path + ".remote_info[1]");
        out.protocol = parse_protocol(ri[2], path + ".remote_info[2]");
    } else if (node["remote_info"]) {
        fail(path + ".remote_info", node["remote_info"], "remote_info on a local output");
    }

    if (node["branched_from"])
        out.branched_from = scalar(node["branched_from"], path + ".branched_from");
    return out;
}

RecipeKernel parse_kernel(const YAML::Node& node, const std::string& path) {
    if (!node.IsMap()) fail(path, node, "expected a map");
    require_keys(node, path, {"kernel", "id", "frequency", "params", "input", "output"});
    RecipeKernel k;
    k.kernel_type = scalar(node["kernel"], path + ".kernel");
    k.id = scalar(node["id"], path + ".id");
    if (node["frequency"]) {
        const std::string f = scalar(node["frequency"], path + ".frequency");
        if (!looks_int(f) && !looks_double(f)) fail(path + ".frequency", node["frequency"], "must be a number");
        k.frequency = std::stod(f);
        if (!(*k.frequency > 0.0)) fail(path + ".frequency", node["frequency"], "must be > 0");
    }
    if (node["params"]) {
        if (!node["params"].IsMap()) fail(path + ".params", node["params"], "expected a map");
        for (const auto& kv : node["params"]) {
            const std::string key = kv.first.as<std::string>();
            k.params[key] = parse_param(kv.second, path + ".params." + key);
        }
    }
    if (node["input"]) {
        if (!node["input"].IsSequence()) fail(path + ".input", node["input"], "expected a list");
        std::size_t i = 0;
        for (const auto& item : node["input"])
            k.input.push_back(parse_input(item, path + ".input[" + std::to_string(i++) + "]"));
    }
    if (node["output"]) {
        if (!node["output"].IsSequence()) fail(path + ".output", node["output"], "expected a list");
        std::size_t i = 0;
        for (const auto& item : node["output"])
            k.output.push_back(parse_output(item, path + ".output[" + std::to_string(i++) + "]"));
    }
    return k;
}

LocalConnection parse_local_connection(const YAML::Node& node, const std::string& path) {
    if (!node.IsMap()) fail(path, node, "expected a map");
    require_keys(node, path,
                 {"send_kernel", "send_port_name", "recv_kernel", "recv_port_name", "queue_size"});
    LocalConnection c;
    c.send_kernel = scalar(node["send_kernel"], path + ".send_kernel");
    c.send_port_name = scalar(node["send_port_name"], path + ".send_port_name");
    c.recv_kernel = scalar(node["recv_kernel"], path + ".recv_kernel");
    c.recv_port_name = scalar(node["recv_port_name"], path + ".recv_port_name");
    if (node["queue_size"]) c.queue_size = parse_queue_size(node["queue_size"], path + ".queue_size");
    return c;
}

} // namespace

PipelineRecipe parse_recipe(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("recipe: YAML syntax error: ") + e.what());
    }
    if (!root.IsMap()) throw ConfigError("recipe: top level must be a map");
    require_keys(root, "recipe", {"kernels", "local_connections", "placements"});

    PipelineRecipe r;
    const auto kernels = root["kernels"];
    if (!kernels || !kernels.IsSequence() || kernels.size() == 0)
        throw ConfigError("recipe: kernels: at least one kernel is required");
    std::size_t i = 0;
    for (const auto& item : kernels)
        r.kernels.push_back(parse_kernel(item, "kernels[" + std::to_string(i++) + "]"));

    if (root["local_connections"]) {
        const auto lc = root["local_connections"];
        if (!lc.IsSequence()) throw ConfigError("recipe: local_connections: expected a list");
        std::size_t j = 0;
        for (const auto& item : lc)
            r.local_connections.push_back(
                parse_local_connection(item, "local_connections[" + std::to_string(j++) + "]"));
    }

    if (root["placements"]) {
        const auto pl = root["placements"];
        if (!pl.IsMap()) throw ConfigError("recipe: placements: expected a map");
        for (const auto& kv : pl)
            r.placements[kv.first.as<std::string>()] =
                scalar(kv.second, "placements." + kv.first.as<std::string>());
    }
    return r;
}

namespace {
// Whole-valued doubles keep a decimal point so they re-parse as doubles.
std::string double_scalar(double d) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", d);
    std::string s(buf);
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}
} // namespace

std::string emit_recipe(const PipelineRecipe& r) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "kernels" << YAML::Value << YAML::BeginSeq;
    for (const auto& k : r.kernels) {
        out << YAML::BeginMap;
        out << YAML::Key << "kernel" << YAML::Value << k.kernel_type;
        out << YAML::Key << "id" << YAML::Value << k.id;
        if (k.frequency) out << YAML::Key << "frequency" << YAML::Value << double_scalar(*k.frequency);
        if (!k.params.empty()) {
            out << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
            for (const auto& [key, v] : k.params) {
                out << YAML::Key << key << YAML::Value;
                if (const auto* i = std::get_if<std::int64_t>(&v))
                    out << *i;
                else if (const auto* d = std::get_if<double>(&v))
                    out << double_scalar(*d);
                else if (const auto* b = std::get_if<bool>(&v))
                    out << *b;
                else
                    out << std::get<std::string>(v);
            }
            out << YAML::EndMap;
        }
        if (!k.input.empty()) {
            out << YAML::Key << "input" << YAML::Value << YAML::BeginSeq;
            for (const auto& in : k.input) {
                out << YAML::BeginMap;
                out << YAML::Key << "port_name" << YAML::Value << in.port_name;
                out << YAML::Key << "connection_type" << YAML::Value
                    << to_string(in.connection_type);
                if (in.connection_type == ConnType::remote) {
                    out << YAML::Key << "remote_info" << YAML::Value << YAML::Flow
                        << YAML::BeginSeq << to_string(*in.protocol)
                        << static_cast<int>(*in.listen_port) << YAML::EndSeq;
                }
                if (in.queue_size)
                    out << YAML::Key << "queue_size" << YAML::Value
                        << static_cast<std::uint64_t>(*in.queue_size);
                out << YAML::EndMap;
            }
            out << YAML::EndSeq;
        }
        if (!k.output.empty()) {
            out << YAML::Key << "output" << YAML::Value << YAML::BeginSeq;
            for (const auto& o : k.output) {
                out << YAML::BeginMap;
                out << YAML::Key << "port_name" << YAML::Value << o.port_name;
                out << YAML::Key << "connection_type" << YAML::Value
                    << to_string(o.connection_type);
                if (o.semantics)
                    out << YAML::Key << "semantics" << YAML::Value
                        << (*o.semantics == PortSemantics::blocking ? "blocking" : "nonblocking");
                if (o.connection_type == ConnType::remote) {
                    out << YAML::Key << "remote_info" << YAML::Value << YAML::Flow
                        << YAML::BeginSeq << *o.remote_host << static_cast<int>(*o.remote_port)
                        << to_string(*o.protocol) << YAML::EndSeq;
                }
                if (o.branched_from)
                    out << YAML::Key << "branched_from" << YAML::Value << *o.branched_from;
                out << YAML::EndMap;
            }
            out << YAML::EndSeq;
        }
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    if (!r.local_connections.empty()) {
        out << YAML::Key << "local_connections" << YAML::Value << YAML::BeginSeq;
        for (const auto& c : r.local_connections) {
            out << YAML::BeginMap;
            out << YAML::Key << "send_kernel" << YAML::Value << c.send_kernel;
            out << YAML::Key << "send_port_name" << YAML::Value << c.send_port_name;
            out << YAML::Key << "recv_kernel" << YAML::Value << c.recv_kernel;
            out << YAML::Key << "recv_port_name" << YAML::Value << c.recv_port_name;
            if (c.queue_size)
                out << YAML::Key << "queue_size" << YAML::Value
                    << static_cast<std::uint64_t>(*c.queue_size);
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }

    if (!r.placements.empty()) {
        out << YAML::Key << "placements" << YAML::Value << YAML::BeginMap;
        for (const auto& [id, host] : r.placements)
            out << YAML::Key << id << YAML::Value << host;
        out << YAML::EndMap;
    }
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

const KernelPlan* PipelineMetadata::find(const std::string& id) const {
    for (const auto& k : kernels)
        if (k.id == id) return &k;
    return nullptr;
}

RecipeInvalid::RecipeInvalid(std::vector<Violation> violations)
    : ConfigError([&violations] {
          std::ostringstream os;
          os << "recipe validation failed with " << violations.size() << " violation(s):";
          for (const auto& v : violations) os << "\n  - " << v.str();
          return os.str();
      }()),
      violations_(std::move(violations)) {}

} // namespace flexpipe::recipe
