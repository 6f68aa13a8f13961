#include "flexpipe/port.hpp"

#include "flexpipe/log.hpp"

namespace flexpipe {

std::string to_string(PortSemantics s) {
    return s == PortSemantics::blocking ? "blocking" : "nonblocking";
}

std::string to_string(PortDirection d) { return d == PortDirection::input ? "input" : "output"; }

bool is_unactivated(const ConnectionState& s) {
    return std::holds_alternative<Unactivated>(s);
}

std::string to_string(const ConnectionState& s) {
    if (std::holds_alternative<Unactivated>(s)) return "unactivated";
    if (const auto* l = std::get_if<LocalConn>(&s))
        return "local(capacity=" + std::to_string(l->queue_capacity) + ")";
    if (const auto* r = std::get_if<RemoteReliableConn>(&s))
        return "remote-reliable(" + r->host + ":" + std::to_string(r->port) + ")";
    const auto& d = std::get<RemoteDatagramConn>(s);
    return "remote-datagram(" + d.host + ":" + std::to_string(d.port) + ")";
}

FlexPort::FlexPort(std::string tag, PortDirection direction,
                   std::optional<PortSemantics> semantics)
    : tag_(std::move(tag)), direction_(direction), semantics_(semantics) {
    if (direction_ == PortDirection::input && !semantics_)
        throw ConfigError("input port '" + tag_ + "' needs receive semantics at registration");
}

FlexPort::~FlexPort() { close(); }

PortSemantics FlexPort::semantics() const {
    if (!semantics_)
        throw ConfigError("output port '" + tag_ + "' has no semantics before activation");
    return *semantics_;
}

void FlexPort::require_output(const char* op) const {
    if (direction_ != PortDirection::output)
        throw ConfigError(std::string(op) + " on input port '" + tag_ + "'");
}

void FlexPort::require_input(const char* op) const {
    if (direction_ != PortDirection::input)
        throw ConfigError(std::string(op) + " on output port '" + tag_ + "'");
}

void FlexPort::mark_unconnected() {
    require_input("mark_unconnected");
    if (semantics() == PortSemantics::blocking)
        throw ConfigError("blocking input '" + tag_ + "' cannot stay unconnected");
    if (activated()) throw ConfigError("port '" + tag_ + "' is already activated");
    unconnected_ = true;
}

void FlexPort::activate(const ConnectionState& state, std::optional<PortSemantics> semantics,
                        const ActivateOptions& opts) {
    if (activated()) throw ConfigError("port '" + tag_ + "' is already activated");
    if (unconnected_) throw ConfigError("port '" + tag_ + "' was marked unconnected");
    if (is_unactivated(state)) throw ConfigError("cannot activate '" + tag_ + "' as unactivated");

    if (direction_ == PortDirection::input) {
        if (semantics)
            throw ConfigError("input port '" + tag_ +
                              "': receive semantics are fixed at registration");
    } else {
        if (!semantics)
            throw ConfigError("output port '" + tag_ + "': semantics required at activation");
        semantics_ = semantics;
    }

    if (const auto* l = std::get_if<LocalConn>(&state)) {
        if (l->queue_capacity < 1) throw ConfigError("local queue capacity must be >= 1");
        local_ = std::make_shared<LocalChannel>(l->queue_capacity);
    } else if (const auto* r = std::get_if<RemoteReliableConn>(&state)) {
        if (r->port == 0) throw ConfigError("remote port must be within 1..65535");
        if (direction_ == PortDirection::output)
            start_reliable_output(*r, opts);
        else
            start_reliable_input(*r, opts);
    } else if (const auto* d = std::get_if<RemoteDatagramConn>(&state)) {
        if (d->port == 0) throw ConfigError("remote port must be within 1..65535");
        if (direction_ == PortDirection::output)
            start_datagram_output(*d, opts);
        else
            start_datagram_input(*d, opts);
    }
    state_ = state;
}

void FlexPort::attach_local(std::shared_ptr<LocalChannel> channel,
                            std::optional<PortSemantics> semantics) {
    if (activated()) throw ConfigError("port '" + tag_ + "' is already activated");
    if (direction_ == PortDirection::output) {
        if (!semantics)
            throw ConfigError("output port '" + tag_ + "': semantics required at activation");
        semantics_ = semantics;
    } else if (semantics) {
        throw ConfigError("input port '" + tag_ + "': receive semantics are fixed at registration");
    }
    state_ = LocalConn{channel->capacity()};
    local_ = std::move(channel);
}

FlexPort& FlexPort::add_branch(const std::string& name, const ConnectionState& state,
                               PortSemantics semantics, const ActivateOptions& opts) {
    require_output("branch");
    if (find_branch(name)) throw ConfigError("duplicate branch name '" + name + "'");
    auto branch = std::make_unique<FlexPort>(name, PortDirection::output);
    branch->on_error_ = on_error_;
    branch->activate(state, semantics, opts);
    branches_.push_back(std::move(branch));
    return *branches_.back();
}

FlexPort& FlexPort::add_local_branch(const std::string& name,
                                     std::shared_ptr<LocalChannel> channel,
                                     PortSemantics semantics) {
    require_output("branch");
    if (find_branch(name)) throw ConfigError("duplicate branch name '" + name + "'");
    auto branch = std::make_unique<FlexPort>(name, PortDirection::output);
    branch->on_error_ = on_error_;
    branch->attach_local(std::move(channel), semantics);
    branches_.push_back(std::move(branch));
    return *branches_.back();
}

FlexPort* FlexPort::find_branch(const std::string& name) {
    for (auto& b : branches_)
        if (b->tag() == name) return b.get();
    return nullptr;
}

void FlexPort::stamp_for_emit(Message& msg) {
    if (msg.issued_by_ != this || msg.seq < emit_floor_) {
        msg.seq = next_seq_++;
        msg.issued_by_ = this;
    }
    if (msg.seq >= next_seq_) next_seq_ = msg.seq + 1;
    emit_floor_ = msg.seq + 1;
}

void FlexPort::emit_one(Message msg) {
    {
        std::lock_guard lk(stats_mutex_);
        ++stats_.sent;
    }
    bool delivered = false;
    if (local_) {
        if (semantics() == PortSemantics::blocking)
            delivered = local_->push_wait(std::move(msg)) == WaitStatus::ok;
        else
            delivered = local_->try_push(std::move(msg));
    } else if (handoff_) { // reliable sender staging queue
        if (semantics() == PortSemantics::blocking)
            delivered = handoff_->push_wait(std::move(msg)) == WaitStatus::ok;
        else
            delivered = handoff_->try_push(std::move(msg));
    } else if (datagram_) {
        try {
            datagram_->send(msg);
            delivered = true;
        } catch (const TransportError& e) {
            report_error(e.what());
        }
    } else {
        throw ConfigError("port '" + tag_ + "' is not activated for sending");
    }
    std::lock_guard lk(stats_mutex_);
    if (delivered)
        ++stats_.delivered;
    else
        ++stats_.dropped;
}

void FlexPort::emit(Message msg) {
    require_output("send");
    if (!activated()) throw ConfigError("send on unactivated port '" + tag_ + "'");
    // Branches first (copies), then the registered endpoint takes ownership.
    for (auto& b : branches_) b->emit_one(msg);
    emit_one(std::move(msg));
}

void FlexPort::record_consumed(const Message& msg) {
    std::lock_guard lk(stats_mutex_);
    ++stats_.received;
    stats_.age_sum_ms += static_cast<double>(now_ns() - msg.ts_origin) / 1e6;
}

InputResult FlexPort::poll() {
    require_input("receive");
    if (unconnected_) return {};
    LocalChannel* src = local_ ? local_.get() : handoff_.get();
    if (!src) throw ConfigError("receive on unactivated port '" + tag_ + "'");
    Message m;
    switch (src->try_pop(m)) {
        case PopStatus::ok:
            record_consumed(m);
            return {std::move(m), false};
        case PopStatus::empty:
            return {};
        case PopStatus::closed:
            return {std::nullopt, true};
    }
    return {};
}

InputResult FlexPort::wait(std::optional<std::chrono::milliseconds> timeout) {
    require_input("receive");
    if (unconnected_) return {};
    LocalChannel* src = local_ ? local_.get() : handoff_.get();
    if (!src) throw ConfigError("receive on unactivated port '" + tag_ + "'");
    Message m;
    switch (src->pop_wait(m, timeout)) {
        case WaitStatus::ok:
            record_consumed(m);
            return {std::move(m), false};
        case WaitStatus::closed:
            return {std::nullopt, true};
        case WaitStatus::timed_out:
            throw ConfigError("blocking receive on '" + tag_ + "' timed out (deadlock guard)");
    }
    return {};
}

void FlexPort::report_error(const std::string& cause) {
    failed_.store(true, std::memory_order_relaxed);
    log_line(LogLevel::error, "port/" + tag_, cause);
    if (on_error_) on_error_(tag_, cause);
}

// --- remote endpoints -------------------------------------------------------

void FlexPort::start_reliable_output(const RemoteReliableConn& conn, const ActivateOptions& opts) {
    handoff_ = std::make_shared<LocalChannel>(opts.remote_output_queue);
    const std::string host = conn.host.empty() ? "127.0.0.1" : conn.host;
    const auto port = conn.port;
    const int attempts = opts.connect_attempts;
    const auto backoff = opts.connect_backoff;
    worker_ = std::thread([this, host, port, attempts, backoff] {
        std::shared_ptr<transport::ReliableConn> session;
        try {
            auto c = transport::ReliableConn::connect_retry(host, port, attempts, backoff,
                                                            &worker_stop_);
            if (!c) { // cancelled
                handoff_->close();
                return;
            }
            session = std::make_shared<transport::ReliableConn>(std::move(*c));
        } catch (const TransportError& e) {
            report_error(e.what());
            handoff_->close();
            return;
        }
        {
            std::lock_guard lk(conn_mutex_);
            conn_ = session;
            if (pending_conditions_) session->set_network_conditions(*pending_conditions_);
        }
        connected_.store(true, std::memory_order_relaxed);
        Message m;
        for (;;) {
            auto st = handoff_->pop_wait(m);
            if (st != WaitStatus::ok) break; // closed and drained
            try {
                session->send(m);
            } catch (const TransportError& e) {
                report_error(e.what());
                handoff_->close();
                break;
            }
        }
        // Drain anything left after close, then signal end of stream.
        while (handoff_->try_pop(m) == PopStatus::ok) {
            try {
                session->send(m);
            } catch (const TransportError&) {
                break;
            }
        }
        try {
            session->send_eos();
        } catch (const TransportError&) {
        }
        session->close();
    });
}

void FlexPort::start_reliable_input(const RemoteReliableConn& conn, const ActivateOptions& opts) {
    listener_ = std::make_unique<transport::ReliableListener>(conn.port);
    handoff_ = std::make_shared<LocalChannel>(opts.remote_input_queue);
    worker_ = std::thread([this] {
        std::optional<transport::ReliableConn> session;
        while (!worker_stop_.load(std::memory_order_relaxed)) {
            session = listener_->accept(std::chrono::milliseconds(200));
            if (session) break;
        }
        if (!session) {
            handoff_->close();
            return;
        }
        Message m;
        while (!worker_stop_.load(std::memory_order_relaxed)) {
            transport::RecvStatus st;
            try {
                st = session->recv(m, std::chrono::milliseconds(200), &worker_stop_);
            } catch (const std::exception& e) {
                report_error(e.what());
                break;
            }
            if (st == transport::RecvStatus::end_of_stream) break;
            if (st != transport::RecvStatus::message) continue;
            m.append_hop(kTransportStage);
            if (handoff_->push_wait(std::move(m)) != WaitStatus::ok) break;
        }
        session->close();
        handoff_->close();
    });
}

void FlexPort::start_datagram_output(const RemoteDatagramConn& conn, const ActivateOptions& opts) {
    const std::string host = conn.host.empty() ? "127.0.0.1" : conn.host;
    datagram_ = std::make_unique<transport::DatagramEndpoint>(0, host, conn.port, opts.datagram);
}

void FlexPort::start_datagram_input(const RemoteDatagramConn& conn, const ActivateOptions& opts) {
    datagram_ = std::make_unique<transport::DatagramEndpoint>(conn.port, "", 0, opts.datagram);
    handoff_ = std::make_shared<LocalChannel>(opts.remote_input_queue);
    worker_ = std::thread([this] {
        Message m;
        while (!worker_stop_.load(std::memory_order_relaxed)) {
            transport::RecvStatus st;
            try {
                st = datagram_->recv(m, std::chrono::milliseconds(200), &worker_stop_);
            } catch (const std::exception& e) {
                report_error(e.what());
                break;
            }
            if (st == transport::RecvStatus::end_of_stream) break;
            if (st != transport::RecvStatus::message) continue;
            m.append_hop(kTransportStage);
            handoff_->try_push(std::move(m)); // full hand-off drops for recency
        }
        handoff_->close();
    });
}

void FlexPort::close() {
    if (closed_) return;
    closed_ = true;
    for (auto& b : branches_) b->close();
    if (local_) local_->close();
    if (direction_ == PortDirection::output) {
        if (handoff_) handoff_->close(); // sender worker drains, sends EOS, exits
        if (datagram_) {
            try {
                datagram_->send_eos();
            } catch (...) {
            }
        }
        if (worker_.joinable()) worker_.join();
        worker_stop_.store(true, std::memory_order_relaxed);
    } else {
        worker_stop_.store(true, std::memory_order_relaxed);
        if (handoff_) handoff_->close();
        if (listener_) listener_->stop();
        if (datagram_) datagram_->stop();
        if (worker_.joinable()) worker_.join();
    }
    if (datagram_) datagram_.reset();
}

PortStats FlexPort::stats() const {
    std::lock_guard lk(stats_mutex_);
    return stats_;
}

std::optional<std::uint16_t> FlexPort::listen_port() const {
    if (listener_) return listener_->port();
    if (direction_ == PortDirection::input && datagram_) return datagram_->port();
    return std::nullopt;
}

bool FlexPort::ready() const {
    if (direction_ == PortDirection::output &&
        std::holds_alternative<RemoteReliableConn>(state_))
        return connected_.load(std::memory_order_relaxed);
    return activated() || unconnected_;
}

std::optional<transport::DatagramStats> FlexPort::datagram_stats() const {
    if (!datagram_) return std::nullopt;
    return datagram_->stats();
}

void FlexPort::set_network_conditions(const transport::NetworkConditions& cond) {
    cond.validate();
    if (datagram_) {
        datagram_->set_network_conditions(cond);
        return;
    }
    std::lock_guard lk(conn_mutex_);
    if (conn_) {
        conn_->set_network_conditions(cond);
    } else {
        pending_conditions_ = cond; // applied when the connector finishes
    }
}

} // namespace flexpipe
