#include "flexpipe/port_manager.hpp"

namespace flexpipe {

const PortSpec* KernelDescriptor::find_in(const std::string& tag) const {
    for (const auto& p : in_ports)
        if (p.tag == tag) return &p;
    return nullptr;
}

bool KernelDescriptor::has_out(const std::string& tag) const {
    for (const auto& t : out_ports)
        if (t == tag) return true;
    return false;
}

FlexPort* PortManager::find(const std::vector<std::unique_ptr<FlexPort>>& ports,
                            const std::string& tag) const {
    for (const auto& p : ports)
        if (p->tag() == tag) return p.get();
    return nullptr;
}

void PortManager::register_in_port(const std::string& tag, PortSemantics semantics) {
    if (find(inputs_, tag) || find(outputs_, tag))
        throw ConfigError("duplicate port tag '" + tag + "'");
    inputs_.push_back(std::make_unique<FlexPort>(tag, PortDirection::input, semantics));
    inputs_.back()->set_error_callback(on_error_);
}

void PortManager::register_out_port(const std::string& tag) {
    if (find(inputs_, tag) || find(outputs_, tag))
        throw ConfigError("duplicate port tag '" + tag + "'");
    outputs_.push_back(std::make_unique<FlexPort>(tag, PortDirection::output));
    outputs_.back()->set_error_callback(on_error_);
}

FlexPort& PortManager::input(const std::string& tag) {
    if (auto* p = find(inputs_, tag)) return *p;
    throw ConfigError("unknown input port '" + tag + "'");
}

FlexPort& PortManager::output(const std::string& tag) {
    if (auto* p = find(outputs_, tag)) return *p;
    throw ConfigError("unknown output port '" + tag + "'");
}

const FlexPort* PortManager::find_input(const std::string& tag) const {
    return find(inputs_, tag);
}

const FlexPort* PortManager::find_output(const std::string& tag) const {
    return find(outputs_, tag);
}

void PortManager::activate_port(const std::string& tag, const ConnectionState& state,
                                std::optional<PortSemantics> semantics,
                                const ActivateOptions& opts) {
    if (auto* p = find(inputs_, tag)) {
        p->activate(state, semantics, opts);
        return;
    }
    if (auto* p = find(outputs_, tag)) {
        p->activate(state, semantics, opts);
        return;
    }
    throw ConfigError("unknown port tag '" + tag + "'");
}

void PortManager::branch_output(const std::string& source_tag, const std::string& branch_name,
                                const ConnectionState& state, PortSemantics semantics,
                                const ActivateOptions& opts) {
    if (find(inputs_, source_tag))
        throw ConfigError("cannot branch from input port '" + source_tag + "'");
    auto* src = find(outputs_, source_tag);
    if (!src) throw ConfigError("unknown output port '" + source_tag + "'");
    if (find(outputs_, branch_name) || find(inputs_, branch_name))
        throw ConfigError("branch name '" + branch_name + "' collides with a registered port");
    src->add_branch(branch_name, state, semantics, opts);
}

void PortManager::attach_local_input(const std::string& tag,
                                     std::shared_ptr<LocalChannel> channel) {
    input(tag).attach_local(std::move(channel), std::nullopt);
}

void PortManager::attach_local_output(const std::string& tag,
                                      std::shared_ptr<LocalChannel> channel,
                                      PortSemantics semantics) {
    output(tag).attach_local(std::move(channel), semantics);
}

void PortManager::attach_local_branch(const std::string& source_tag,
                                      const std::string& branch_name,
                                      std::shared_ptr<LocalChannel> channel,
                                      PortSemantics semantics) {
    if (find(inputs_, source_tag))
        throw ConfigError("cannot branch from input port '" + source_tag + "'");
    auto* src = find(outputs_, source_tag);
    if (!src) throw ConfigError("unknown output port '" + source_tag + "'");
    src->add_local_branch(branch_name, std::move(channel), semantics);
}

void PortManager::mark_input_unconnected(const std::string& tag) {
    input(tag).mark_unconnected();
}

InputResult PortManager::get_input(const std::string& tag) {
    auto& port = input(tag);
    if (port.semantics() == PortSemantics::blocking) return port.wait(blocking_timeout_);
    return port.poll();
}

Message PortManager::get_output_placeholder(const std::string& tag) {
    if (find(inputs_, tag))
        throw ConfigError("get_output_placeholder on input port '" + tag + "'");
    auto& port = output(tag);
    if (!port.activated())
        throw ConfigError("get_output_placeholder on unactivated port '" + tag + "'");
    Message m;
    m.seq = port.issue_placeholder_seq();
    m.ts_origin = now_ns();
    m.issued_by_ = &port;
    return m;
}

void PortManager::send_output(const std::string& tag, Message msg) {
    if (find(inputs_, tag)) throw ConfigError("send on input port '" + tag + "'");
    auto& port = output(tag);
    port.stamp_for_emit(msg);
    msg.append_hop(stage_label_.empty() ? tag : stage_label_);
    port.emit(std::move(msg));
}

std::vector<std::string> PortManager::unactivated_ports() const {
    std::vector<std::string> out;
    for (const auto& p : inputs_)
        if (!p->activated() && !p->marked_unconnected()) out.push_back(p->tag());
    for (const auto& p : outputs_)
        if (!p->activated()) out.push_back(p->tag());
    return out;
}

KernelDescriptor PortManager::descriptor(const std::string& kernel_type,
                                         const std::string& instance_id) const {
    KernelDescriptor d;
    d.kernel_type = kernel_type;
    d.instance_id = instance_id;
    for (const auto& p : inputs_) d.in_ports.push_back({p->tag(), p->semantics()});
    for (const auto& p : outputs_) d.out_ports.push_back(p->tag());
    return d;
}

void PortManager::close_inputs() {
    for (auto& p : inputs_) p->close();
}

void PortManager::close_outputs() {
    for (auto& p : outputs_) p->close();
}

void PortManager::set_error_callback(FlexPort::ErrorCallback cb) {
    on_error_ = cb;
    for (auto& p : inputs_) p->set_error_callback(cb);
    for (auto& p : outputs_) p->set_error_callback(cb);
}

} // namespace flexpipe
