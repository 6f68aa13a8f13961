#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "flexpipe/kernel.hpp"

namespace flexpipe {

using ParamValue = std::variant<std::int64_t, double, std::string, bool>;
using KernelParams = std::map<std::string, ParamValue>;

std::int64_t param_int(const KernelParams& p, const std::string& key, std::int64_t def);
double param_double(const KernelParams& p, const std::string& key, double def);
std::string param_string(const KernelParams& p, const std::string& key, const std::string& def);
bool param_bool(const KernelParams& p, const std::string& key, bool def);
std::string param_to_string(const ParamValue& v);

// Rejects keys a kernel type does not understand.
void require_known_params(const KernelParams& p, const std::vector<std::string>& allowed,
                          const std::string& kernel_type);

// Maps kernel type names to factories. The descriptor of each type is probed
// once at registration by constructing an instance with default parameters.
class KernelRegistry {
public:
    using Factory = std::function<std::unique_ptr<Kernel>(const KernelParams&)>;

    void add(const std::string& type, Factory factory);
    template <class T>
    void add(const std::string& type) {
        add(type, [](const KernelParams& p) { return std::make_unique<T>(p); });
    }

    bool has(const std::string& type) const;
    const KernelDescriptor& descriptor(const std::string& type) const;
    std::unique_ptr<Kernel> create(const std::string& type, const std::string& instance_id,
                                   const KernelParams& params) const;
    std::vector<std::string> types() const;

    // Stable hash over type names and port signatures; identical binaries
    // running different recipes report the same fingerprint.
    std::uint64_t fingerprint() const;

private:
    struct Entry {
        Factory factory;
        KernelDescriptor descriptor;
    };
    std::map<std::string, Entry> entries_;
};

} // namespace flexpipe
