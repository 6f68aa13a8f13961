#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flexpipe/port.hpp"

namespace flexpipe {

struct PortSpec {
    std::string tag;
    PortSemantics semantics = PortSemantics::blocking;

    bool operator==(const PortSpec&) const = default;
};

// Development-time declaration of a kernel: its type, registered input ports
// with receive semantics, and output port tags.
struct KernelDescriptor {
    std::string kernel_type;
    std::string instance_id;
    std::vector<PortSpec> in_ports;
    std::vector<std::string> out_ports;

    const PortSpec* find_in(const std::string& tag) const;
    bool has_out(const std::string& tag) const;
};

// Registration happens at kernel construction (developer); activation happens
// at deployment from the recipe metadata (user). The kernel function uses the
// registered tags without knowing how the ports were configured.
class PortManager {
public:
    // --- registration (development time) ------------------------------------
    void register_in_port(const std::string& tag, PortSemantics semantics);
    void register_out_port(const std::string& tag);

    // --- activation (deployment time) ---------------------------------------
    void activate_port(const std::string& tag, const ConnectionState& state,
                       std::optional<PortSemantics> semantics = std::nullopt,
                       const ActivateOptions& opts = {});
    void branch_output(const std::string& source_tag, const std::string& branch_name,
                       const ConnectionState& state, PortSemantics semantics,
                       const ActivateOptions& opts = {});
    void attach_local_input(const std::string& tag, std::shared_ptr<LocalChannel> channel);
    void attach_local_output(const std::string& tag, std::shared_ptr<LocalChannel> channel,
                             PortSemantics semantics);
    void attach_local_branch(const std::string& source_tag, const std::string& branch_name,
                             std::shared_ptr<LocalChannel> channel, PortSemantics semantics);
    void mark_input_unconnected(const std::string& tag);

    // --- kernel-facing dataflow ---------------------------------------------
    // Blocking inputs suspend until a message arrives; non-blocking inputs
    // return absent immediately. end_of_stream is reported once the upstream
    // closed and the queue drained.
    InputResult get_input(const std::string& tag);
    // A writable message pre-stamped with ts_origin = now and this port's
    // next sequence number.
    Message get_output_placeholder(const std::string& tag);
    // Emits on the registered port and every branch. A hop timestamp labeled
    // with the kernel's stage label is appended before emission.
    void send_output(const std::string& tag, Message msg);

    // --- introspection -------------------------------------------------------
    FlexPort& input(const std::string& tag);
    FlexPort& output(const std::string& tag);
    const FlexPort* find_input(const std::string& tag) const;
    const FlexPort* find_output(const std::string& tag) const;
    const std::vector<std::unique_ptr<FlexPort>>& inputs() const { return inputs_; }
    const std::vector<std::unique_ptr<FlexPort>>& outputs() const { return outputs_; }
    std::vector<std::string> unactivated_ports() const;

    KernelDescriptor descriptor(const std::string& kernel_type,
                                const std::string& instance_id) const;

    void close_inputs();
    void close_outputs();

    void set_stage_label(std::string label) { stage_label_ = std::move(label); }
    const std::string& stage_label() const { return stage_label_; }
    // Deadlock guard for tests: blocking receives throw after this long.
    void set_blocking_timeout(std::optional<std::chrono::milliseconds> t) {
        blocking_timeout_ = t;
    }
    void set_error_callback(FlexPort::ErrorCallback cb);

private:
    FlexPort* find(const std::vector<std::unique_ptr<FlexPort>>& ports,
                   const std::string& tag) const;

    std::vector<std::unique_ptr<FlexPort>> inputs_;
    std::vector<std::unique_ptr<FlexPort>> outputs_;
    std::string stage_label_;
    std::optional<std::chrono::milliseconds> blocking_timeout_;
    FlexPort::ErrorCallback on_error_;
};

} // namespace flexpipe
