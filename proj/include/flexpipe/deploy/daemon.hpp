#pragma once

#include <atomic>
#include <map>
#include <thread>

#include "flexpipe/deploy/pipeline.hpp"
#include "flexpipe/transport/reliable.hpp"

namespace flexpipe::deploy {

// Control protocol: length-prefixed serialized messages over the reliable
// transport. The message's type_tag selects the request, the payload is JSON.
//
//   flexpipe/deploy    {"uuid": "...", "recipe": "<yaml>"}
//   flexpipe/teardown  {"uuid": "..."}
//   flexpipe/status    {}
//
// Replies use the same framing with the "-reply" suffix on the tag. A deploy
// reply carries {"accepted": bool, "violations": [...], "ready_ports":
// [{"instance","port","listen_port"}]}.
inline constexpr const char* kTagDeploy = "flexpipe/deploy";
inline constexpr const char* kTagTeardown = "flexpipe/teardown";
inline constexpr const char* kTagStatus = "flexpipe/status";
inline constexpr const char* kTagReplySuffix = "-reply";

struct DeployReply {
    bool accepted = false;
    std::vector<std::string> violations;
    std::vector<ReadyPort> ready_ports;
    std::string error;
};

// The request listener: accepts recipe parts, validates and instantiates them
// all-or-nothing, and runs the host-side half of distributed pipelines. Many
// pipelines may be hosted at once, keyed by uuid.
class Daemon {
public:
    Daemon(std::uint16_t port, const KernelRegistry& registry, DeployOptions opts = {});
    ~Daemon();

    std::uint16_t port() const { return listener_.port(); }

    // Blocks accepting control sessions until shutdown().
    void run();
    // Runs the accept loop on a background thread.
    void start();
    void shutdown();

    std::vector<std::string> hosted() const;

private:
    void handle_session(transport::ReliableConn conn);
    Message handle_request(const Message& request);
    DeployReply do_deploy(const std::string& uuid, const std::string& recipe_text);

    const KernelRegistry& registry_;
    DeployOptions opts_;
    transport::ReliableListener listener_;
    std::atomic<bool> shutdown_{false};

    mutable std::mutex mutex_;
    std::mutex deploy_mutex_;
    std::map<std::string, std::unique_ptr<Pipeline>> pipelines_;
    std::vector<std::thread> sessions_;
    std::thread accept_thread_;
};

} // namespace flexpipe::deploy
