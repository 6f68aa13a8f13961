#include "flexpipe/registry.hpp"

#include "flexpipe/errors.hpp"

namespace flexpipe {

namespace {
const ParamValue* find_param(const KernelParams& p, const std::string& key) {
    auto it = p.find(key);
    return it == p.end() ? nullptr : &it->second;
}
} // namespace

std::int64_t param_int(const KernelParams& p, const std::string& key, std::int64_t def) {
    const auto* v = find_param(p, key);
    if (!v) return def;
    if (const auto* i = std::get_if<std::int64_t>(v)) return *i;
    throw ConfigError("param '" + key + "' must be an integer");
}

double param_double(const KernelParams& p, const std::string& key, double def) {
    const auto* v = find_param(p, key);
    if (!v) return def;
    if (const auto* i = std::get_if<std::int64_t>(v)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(v)) return *d;
    throw ConfigError("param '" + key + "' must be a number");
}

std::string param_string(const KernelParams& p, const std::string& key, const std::string& def) {
    const auto* v = find_param(p, key);
    if (!v) return def;
    if (const auto* s = std::get_if<std::string>(v)) return *s;
    throw ConfigError("param '" + key + "' must be a string");
}

bool param_bool(const KernelParams& p, const std::string& key, bool def) {
    const auto* v = find_param(p, key);
    if (!v) return def;
    if (const auto* b = std::get_if<bool>(v)) return *b;
    throw ConfigError("param '" + key + "' must be a bool");
}

std::string param_to_string(const ParamValue& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&v)) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.17g", *d);
        return buf;
    }
    if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
    return std::get<std::string>(v);
}

void require_known_params(const KernelParams& p, const std::vector<std::string>& allowed,
                          const std::string& kernel_type) {
    for (const auto& [key, _] : p) {
        bool ok = false;
        for (const auto& a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError(kernel_type + ": unknown param '" + key + "'");
    }
}

void KernelRegistry::add(const std::string& type, Factory factory) {
    if (entries_.count(type)) throw ConfigError("kernel type '" + type + "' already registered");
    auto probe = factory({}); // default parameters must be valid
    Entry e;
    e.descriptor = probe->ports().descriptor(type, "");
    e.factory = std::move(factory);
    entries_.emplace(type, std::move(e));
}

bool KernelRegistry::has(const std::string& type) const { return entries_.count(type) > 0; }

const KernelDescriptor& KernelRegistry::descriptor(const std::string& type) const {
    auto it = entries_.find(type);
    if (it == entries_.end()) throw ConfigError("unknown kernel type '" + type + "'");
    return it->second.descriptor;
}

std::unique_ptr<Kernel> KernelRegistry::create(const std::string& type,
                                               const std::string& instance_id,
                                               const KernelParams& params) const {
    auto it = entries_.find(type);
    if (it == entries_.end()) throw ConfigError("unknown kernel type '" + type + "'");
    auto kernel = it->second.factory(params);
    kernel->set_instance_id(instance_id);
    return kernel;
}

std::vector<std::string> KernelRegistry::types() const {
    std::vector<std::string> out;
    for (const auto& [type, _] : entries_) out.push_back(type);
    return out;
}

std::uint64_t KernelRegistry::fingerprint() const {
    std::uint64_t h = 1469598103934665603ull; // FNV-1a
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= 0x1f;
        h *= 1099511628211ull;
    };
    for (const auto& [type, entry] : entries_) {
        mix(type);
        for (const auto& in : entry.descriptor.in_ports) {
            mix(in.tag);
            mix(to_string(in.semantics));
        }
        for (const auto& out : entry.descriptor.out_ports) mix(out);
    }
    return h;
}

} // namespace flexpipe
