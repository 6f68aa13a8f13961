#pragma once

#include "flexpipe/deploy/daemon.hpp"

namespace flexpipe::deploy {

struct ServerAddress {
    std::string host;
    std::uint16_t port = 0;
};
// Host label (as used in recipe placements) to daemon address.
using ServerMap = std::map<std::string, ServerAddress>;

// Control-plane client for one daemon.
class ControlClient {
public:
    ControlClient(const std::string& host, std::uint16_t port);

    DeployReply deploy(const std::string& uuid, const std::string& recipe_text);
    bool teardown(const std::string& uuid);
    std::vector<std::string> status();
    void close();

private:
    Message request(const Message& msg);
    transport::ReliableConn conn_;
};

std::string random_uuid();

// End-to-end distributed deployment: splits the recipe by placements, deploys
// remote parts first so their listeners are ready, then instantiates and
// starts the local part. Any remote rejection aborts the whole deployment and
// tears down the parts already deployed.
class DistributedPipeline {
public:
    static std::unique_ptr<DistributedPipeline> deploy(const recipe::PipelineRecipe& r,
                                                       const KernelRegistry& registry,
                                                       const ServerMap& servers,
                                                       const DeployOptions& opts = {});
    ~DistributedPipeline();

    Pipeline& local() { return *local_; }
    const std::string& uuid() const { return uuid_; }
    const std::vector<std::string>& remote_hosts() const { return remote_hosts_; }

    // Stops the local half and tears down every remote part. Idempotent.
    void stop();
    bool wait_done(std::chrono::milliseconds timeout);

private:
    DistributedPipeline() = default;

    std::string uuid_;
    std::unique_ptr<Pipeline> local_;
    ServerMap servers_;
    std::vector<std::string> remote_hosts_;
    bool stopped_ = false;
    std::mutex mutex_;
};

} // namespace flexpipe::deploy
