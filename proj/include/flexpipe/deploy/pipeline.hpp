#pragma once

#include <memory>
#include <mutex>
#include <thread>

#include "flexpipe/recipe/recipe.hpp"

namespace flexpipe::deploy {

enum class KernelRunState { created, running, stopped, failed };
enum class AggregateState { created, running, stopped, failed };

std::string to_string(KernelRunState s);

struct DeployOptions {
    int connect_attempts = 20;
    std::chrono::milliseconds connect_backoff{250};
    std::chrono::milliseconds grace{5000}; // join budget on stop
    std::optional<std::chrono::milliseconds> blocking_timeout; // test deadlock guard
};

struct ReadyPort {
    std::string instance;
    std::string port_tag;
    std::uint16_t listen_port = 0;
};

// A local pipeline: kernels constructed from metadata, ports wired, each
// kernel on its own thread once started. Construction failures (unknown
// types, port binds, connector exhaustion) leave the handle in Failed with
// per-kernel causes rather than throwing.
class Pipeline {
public:
    static std::unique_ptr<Pipeline> instantiate(const recipe::PipelineMetadata& meta,
                                                 const KernelRegistry& registry,
                                                 const DeployOptions& opts = {});
    ~Pipeline();

    // Launches every kernel's run loop. Throws ConfigError on a Failed handle.
    void start();
    // Signals all kernels, propagates end-of-stream, joins within the grace
    // period; stragglers are detached and marked Failed. Idempotent.
    void stop();

    // True once every kernel finished on its own (sources completed).
    bool wait_done(std::chrono::milliseconds timeout);
    // True once every reliable connector is established (false on failure).
    bool await_ready(std::chrono::milliseconds timeout) const;

    AggregateState aggregate() const;
    KernelRunState state(const std::string& id) const;
    std::string failure(const std::string& id) const;

    std::size_t kernel_count() const { return kernels_.size(); }
    std::vector<std::string> instance_ids() const;
    Kernel* kernel(const std::string& id) const;
    template <class T>
    T* kernel_as(const std::string& id) const {
        return dynamic_cast<T*>(kernel(id));
    }

    // Remote input listeners with their bound ports.
    std::vector<ReadyPort> ready_ports() const;
    // Timestamped deployment event log (listener binds, connector starts...).
    std::vector<std::string> events() const;

private:
    Pipeline() = default;

    struct Slot {
        std::shared_ptr<Kernel> kernel; // shared so detached stragglers stay valid
        std::thread thread;
        KernelRunState state = KernelRunState::created;
        std::string cause;
        bool detached = false;
    };

    void log_event(const std::string& what);
    Slot* find_slot(const std::string& id);
    const Slot* find_slot(const std::string& id) const;
    void mark_failed(const std::string& id, const std::string& cause);
    AggregateState aggregate_locked() const;

    mutable std::mutex mutex_;
    std::vector<Slot> kernels_;
    std::vector<std::string> events_;
    std::vector<ReadyPort> ready_ports_;
    DeployOptions opts_;
    bool started_ = false;
    bool stopped_ = false;
    bool instantiation_failed_ = false;
    mutable std::condition_variable done_cv_;
    std::size_t running_ = 0;
};

} // namespace flexpipe::deploy
