#include "flexpipe/deploy/pipeline.hpp"

#include <algorithm>

#include "flexpipe/log.hpp"

namespace flexpipe::deploy {

using recipe::ConnKind;
using recipe::PipelineMetadata;
using recipe::PortPlan;

std::string to_string(KernelRunState s) {
    switch (s) {
        case KernelRunState::created: return "created";
        case KernelRunState::running: return "running";
        case KernelRunState::stopped: return "stopped";
        case KernelRunState::failed: return "failed";
    }
    return "?";
}

void Pipeline::log_event(const std::string& what) {
    events_.push_back(std::to_string(now_ns()) + " " + what);
    log_line(LogLevel::debug, "deploy", what);
}

Pipeline::Slot* Pipeline::find_slot(const std::string& id) {
    for (auto& s : kernels_)
        if (s.kernel->id() == id) return &s;
    return nullptr;
}

const Pipeline::Slot* Pipeline::find_slot(const std::string& id) const {
    for (const auto& s : kernels_)
        if (s.kernel->id() == id) return &s;
    return nullptr;
}

void Pipeline::mark_failed(const std::string& id, const std::string& cause) {
    std::lock_guard lk(mutex_);
    if (auto* slot = find_slot(id)) {
        slot->state = KernelRunState::failed;
        if (slot->cause.empty()) slot->cause = cause;
    }
}

std::unique_ptr<Pipeline> Pipeline::instantiate(const PipelineMetadata& meta,
                                                const KernelRegistry& registry,
                                                const DeployOptions& opts) {
    auto p = std::unique_ptr<Pipeline>(new Pipeline());
    p->opts_ = opts;

    ActivateOptions activate;
    activate.connect_attempts = opts.connect_attempts;
    activate.connect_backoff = opts.connect_backoff;

    // Construct all kernels first.
    for (const auto& plan : meta.kernels) {
        Slot slot;
        try {
            slot.kernel = registry.create(plan.kernel_type, plan.id, plan.params);
            if (plan.frequency) slot.kernel->set_frequency(*plan.frequency);
            if (opts.blocking_timeout)
                slot.kernel->ports().set_blocking_timeout(opts.blocking_timeout);
            Pipeline* self = p.get();
            const std::string id = plan.id;
            slot.kernel->ports().set_error_callback(
                [self, id](const std::string& port, const std::string& cause) {
                    self->mark_failed(id, "port " + port + ": " + cause);
                });
        } catch (const std::exception& e) {
            slot.kernel = nullptr;
            slot.state = KernelRunState::failed;
            slot.cause = e.what();
            p->instantiation_failed_ = true;
            // Keep a placeholder identity for reporting.
            struct Dead : Kernel {
                explicit Dead(const std::string& t) : Kernel(t) {}
                StepStatus step() override { return StepStatus::stop; }
            };
            slot.kernel = std::make_shared<Dead>(plan.kernel_type);
            slot.kernel->set_instance_id(plan.id);
        }
        p->kernels_.push_back(std::move(slot));
    }

    // Shared channels for local edges.
    std::vector<std::shared_ptr<LocalChannel>> channels;
    for (const auto& edge : meta.local_edges)
        channels.push_back(std::make_shared<LocalChannel>(edge.capacity));

    // Remote listeners bind before any connector is attempted: within this
    // process by activation order, across processes by remote-first deploys.
    for (std::size_t i = 0; i < meta.kernels.size(); ++i) {
        const auto& plan = meta.kernels[i];
        auto& slot = p->kernels_[i];
        if (slot.state == KernelRunState::failed) continue;
        for (const auto& in : plan.inputs) {
            try {
                switch (in.kind) {
                    case ConnKind::remote_reliable: {
                        ActivateOptions o = activate;
                        o.remote_input_queue = in.queue_capacity;
                        slot.kernel->ports().activate_port(
                            in.tag, RemoteReliableConn{"", in.port}, std::nullopt, o);
                        p->ready_ports_.push_back({plan.id, in.tag, in.port});
                        p->log_event("listener " + plan.id + "." + in.tag + " tcp :" +
                                     std::to_string(in.port));
                        break;
                    }
                    case ConnKind::remote_datagram: {
                        ActivateOptions o = activate;
                        o.remote_input_queue = in.queue_capacity;
                        slot.kernel->ports().activate_port(
                            in.tag, RemoteDatagramConn{"", in.port}, std::nullopt, o);
                        p->ready_ports_.push_back({plan.id, in.tag, in.port});
                        p->log_event("listener " + plan.id + "." + in.tag + " udp :" +
                                     std::to_string(in.port));
                        break;
                    }
                    case ConnKind::unconnected:
                        slot.kernel->ports().mark_input_unconnected(in.tag);
                        break;
                    case ConnKind::local:
                        break; // wired below
                }
            } catch (const std::exception& e) {
                slot.state = KernelRunState::failed;
                slot.cause = e.what();
                p->instantiation_failed_ = true;
            }
        }
    }

    // Local channels and remote connectors.
    for (std::size_t i = 0; i < meta.kernels.size(); ++i) {
        const auto& plan = meta.kernels[i];
        auto& slot = p->kernels_[i];
        if (slot.state == KernelRunState::failed) continue;
        try {
            for (const auto& in : plan.inputs)
                if (in.kind == ConnKind::local)
                    slot.kernel->ports().attach_local_input(
                        in.tag, channels[static_cast<std::size_t>(in.local_edge)]);

            for (const auto& out : plan.outputs) {
                const bool branch = out.branched_from.has_value();
                switch (out.kind) {
                    case ConnKind::local: {
                        auto ch = channels[static_cast<std::size_t>(out.local_edge)];
                        if (branch)
                            slot.kernel->ports().attach_local_branch(*out.branched_from, out.tag,
                                                                     std::move(ch), out.semantics);
                        else
                            slot.kernel->ports().attach_local_output(out.tag, std::move(ch),
                                                                     out.semantics);
                        break;
                    }
                    case ConnKind::remote_reliable: {
                        const ConnectionState st = RemoteReliableConn{out.host, out.port};
                        if (branch)
                            slot.kernel->ports().branch_output(*out.branched_from, out.tag, st,
                                                               out.semantics, activate);
                        else
                            slot.kernel->ports().activate_port(out.tag, st, out.semantics,
                                                               activate);
                        p->log_event("connector " + plan.id + "." + out.tag + " tcp " + out.host +
                                     ":" + std::to_string(out.port));
                        break;
                    }
                    case ConnKind::remote_datagram: {
                        const ConnectionState st = RemoteDatagramConn{out.host, out.port};
                        if (branch)
                            slot.kernel->ports().branch_output(*out.branched_from, out.tag, st,
                                                               out.semantics, activate);
                        else
                            slot.kernel->ports().activate_port(out.tag, st, out.semantics,
                                                               activate);
                        p->log_event("connector " + plan.id + "." + out.tag + " udp " + out.host +
                                     ":" + std::to_string(out.port));
                        break;
                    }
                    case ConnKind::unconnected:
                        break;
                }
            }
        } catch (const std::exception& e) {
            slot.state = KernelRunState::failed;
            slot.cause = e.what();
            p->instantiation_failed_ = true;
        }
    }

    return p;
}

Pipeline::~Pipeline() { stop(); }

void Pipeline::start() {
    std::lock_guard lk(mutex_);
    if (started_) throw ConfigError("pipeline already started");
    if (instantiation_failed_ || aggregate_locked() == AggregateState::failed) {
        std::string causes;
        for (const auto& s : kernels_)
            if (s.state == KernelRunState::failed)
                causes += "\n  " + s.kernel->id() + ": " + s.cause;
        throw ConfigError("cannot start failed pipeline:" + causes);
    }
    started_ = true;
    for (auto& slot : kernels_) {
        slot.state = KernelRunState::running;
        ++running_;
        auto kernel = slot.kernel;
        Pipeline* self = this;
        slot.thread = std::thread([self, kernel] {
            RunResult r = run_kernel(*kernel);
            std::lock_guard lk(self->mutex_);
            if (auto* s = self->find_slot(kernel->id())) {
                if (r.failed) {
                    s->state = KernelRunState::failed;
                    if (s->cause.empty()) s->cause = r.cause;
                } else if (s->state != KernelRunState::failed) {
                    s->state = KernelRunState::stopped;
                }
            }
            --self->running_;
            self->done_cv_.notify_all();
        });
    }
    log_event("pipeline started with " + std::to_string(kernels_.size()) + " kernels");
}

void Pipeline::stop() {
    {
        std::lock_guard lk(mutex_);
        if (stopped_) return;
        stopped_ = true;
    }
    for (auto& slot : kernels_) slot.kernel->request_stop();

    const auto deadline = std::chrono::steady_clock::now() + opts_.grace;
    for (auto& slot : kernels_) {
        if (!slot.thread.joinable()) continue;
        // Wait out the remaining grace budget, then decide. The join happens
        // without the lock held: the exiting thread takes it to publish its
        // final state.
        for (;;) {
            bool running;
            {
                std::lock_guard lk(mutex_);
                running = slot.state == KernelRunState::running;
            }
            if (!running || std::chrono::steady_clock::now() >= deadline) break;
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        bool straggler;
        {
            std::lock_guard lk(mutex_);
            straggler = slot.state == KernelRunState::running;
            if (straggler) {
                slot.thread.detach();
                slot.detached = true;
                slot.state = KernelRunState::failed;
                slot.cause = "did not stop within the grace period";
                log_event("kernel " + slot.kernel->id() + " detached after grace");
            }
        }
        if (!straggler) slot.thread.join();
    }
    {
        std::lock_guard lk(mutex_);
        log_event("pipeline stopped");
    }
}

bool Pipeline::wait_done(std::chrono::milliseconds timeout) {
    std::unique_lock lk(mutex_);
    return done_cv_.wait_for(lk, timeout, [this] { return started_ && running_ == 0; });
}

bool Pipeline::await_ready(std::chrono::milliseconds timeout) const {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        bool all_ready = true;
        bool any_failed = false;
        {
            std::lock_guard lk(mutex_);
            for (const auto& slot : kernels_) {
                if (slot.state == KernelRunState::failed) any_failed = true;
                for (const auto& port : slot.kernel->ports().outputs()) {
                    if (!port->ready()) all_ready = false;
                    if (port->failed()) any_failed = true;
                    for (const auto& b : port->branches()) {
                        if (!b->ready()) all_ready = false;
                        if (b->failed()) any_failed = true;
                    }
                }
            }
        }
        if (any_failed) return false;
        if (all_ready) return true;
        if (std::chrono::steady_clock::now() >= deadline) return false;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
}

AggregateState Pipeline::aggregate_locked() const {
    bool any_failed = false, all_running = !kernels_.empty(), all_stopped = !kernels_.empty();
    for (const auto& s : kernels_) {
        if (s.state == KernelRunState::failed) any_failed = true;
        if (s.state != KernelRunState::running) all_running = false;
        if (s.state != KernelRunState::stopped) all_stopped = false;
    }
    if (any_failed) return AggregateState::failed;
    if (all_running) return AggregateState::running;
    if (all_stopped) return AggregateState::stopped;
    return AggregateState::created;
}

AggregateState Pipeline::aggregate() const {
    std::lock_guard lk(mutex_);
    return aggregate_locked();
}

KernelRunState Pipeline::state(const std::string& id) const {
    std::lock_guard lk(mutex_);
    if (const auto* s = find_slot(id)) return s->state;
    throw ConfigError("unknown kernel instance '" + id + "'");
}

std::string Pipeline::failure(const std::string& id) const {
    std::lock_guard lk(mutex_);
    if (const auto* s = find_slot(id)) return s->cause;
    throw ConfigError("unknown kernel instance '" + id + "'");
}

std::vector<std::string> Pipeline::instance_ids() const {
    std::vector<std::string> out;
    for (const auto& s : kernels_) out.push_back(s.kernel->id());
    return out;
}

Kernel* Pipeline::kernel(const std::string& id) const {
    if (const auto* s = find_slot(id)) return s->kernel.get();
    return nullptr;
}

std::vector<ReadyPort> Pipeline::ready_ports() const {
    std::lock_guard lk(mutex_);
    return ready_ports_;
}

std::vector<std::string> Pipeline::events() const {
    std::lock_guard lk(mutex_);
    return events_;
}

} // namespace flexpipe::deploy
