#include "flexpipe/deploy/client.hpp"

#include <json.hpp>

#include <random>

#include "flexpipe/log.hpp"

namespace flexpipe::deploy {

using nlohmann::json;

namespace {
Message control_message(const std::string& tag, const json& body) {
    Message m;
    m.type_tag = tag;
    const std::string text = body.dump();
    m.set_payload(Bytes(text.begin(), text.end()));
    m.ts_origin = now_ns();
    return m;
}
} // namespace

ControlClient::ControlClient(const std::string& host, std::uint16_t port)
    : conn_(transport::ReliableConn::connect(host, port)) {}

Message ControlClient::request(const Message& msg) {
    conn_.send(msg);
    Message reply;
    auto status = conn_.recv(reply, std::chrono::seconds(30));
    if (status != transport::RecvStatus::message)
        throw TransportError("control request '" + msg.type_tag + "' got no reply");
    return reply;
}

DeployReply ControlClient::deploy(const std::string& uuid, const std::string& recipe_text) {
    Message reply = request(control_message(kTagDeploy, {{"uuid", uuid}, {"recipe", recipe_text}}));
    const auto p = reply.payload();
    const json body = json::parse(p.begin(), p.end());
    DeployReply out;
    out.accepted = body.value("accepted", false);
    if (body.contains("violations"))
        for (const auto& v : body["violations"]) out.violations.push_back(v.get<std::string>());
    out.error = body.value("error", "");
    if (body.contains("ready_ports"))
        for (const auto& rp : body["ready_ports"])
            out.ready_ports.push_back({rp.value("instance", ""), rp.value("port", ""),
                                       rp.value("listen_port", std::uint16_t(0))});
    return out;
}

bool ControlClient::teardown(const std::string& uuid) {
    Message reply = request(control_message(kTagTeardown, {{"uuid", uuid}}));
    const auto p = reply.payload();
    return json::parse(p.begin(), p.end()).value("accepted", false);
}

std::vector<std::string> ControlClient::status() {
    Message reply = request(control_message(kTagStatus, json::object()));
    const auto p = reply.payload();
    const json body = json::parse(p.begin(), p.end());
    std::vector<std::string> out;
    if (body.contains("pipelines"))
        for (const auto& item : body["pipelines"]) out.push_back(item.value("uuid", ""));
    return out;
}

void ControlClient::close() { conn_.close(); }

std::string random_uuid() {
    std::random_device rd;
    std::mt19937_64 rng((static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^
                        static_cast<std::uint64_t>(now_ns()));
    static const char* hex = "0123456789abcdef";
    std::string out(32, '0');
    for (auto& c : out) c = hex[rng() % 16];
    return out;
}

std::unique_ptr<DistributedPipeline> DistributedPipeline::deploy(const recipe::PipelineRecipe& r,
                                                                 const KernelRegistry& registry,
                                                                 const ServerMap& servers,
                                                                 const DeployOptions& opts) {
    // Validate the whole recipe before any side effects.
    (void)recipe::validate(r, registry);
    auto parts = recipe::split_recipe(r);

    for (const auto& [host, part] : parts) {
        if (host == recipe::kLocalHost) continue;
        if (!servers.count(host))
            throw ConfigError("no server address for placement host '" + host + "'");
        (void)part;
    }

    auto dp = std::unique_ptr<DistributedPipeline>(new DistributedPipeline());
    dp->uuid_ = random_uuid();
    dp->servers_ = servers;

    // Remote parts first, so their listeners are bound before local
    // connectors start retrying.
    for (const auto& [host, part] : parts) {
        if (host == recipe::kLocalHost) continue;
        const auto& addr = servers.at(host);
        std::string failure;
        try {
            ControlClient client(addr.host, addr.port);
            auto reply = client.deploy(dp->uuid_, recipe::emit_recipe(part));
            client.close();
            if (!reply.accepted) {
                failure = "server '" + host + "' rejected the part";
                if (!reply.error.empty()) failure += ": " + reply.error;
                for (const auto& v : reply.violations) failure += "\n  " + v;
            }
        } catch (const TransportError& e) {
            failure = "server '" + host + "': " + e.what();
        }
        if (!failure.empty()) {
            dp->stop(); // tear down parts already deployed
            throw ConfigError("distributed deployment aborted: " + failure);
        }
        dp->remote_hosts_.push_back(host);
    }

    // Local part last.
    auto it = parts.find(recipe::kLocalHost);
    if (it != parts.end()) {
        auto meta = recipe::validate(it->second, registry);
        dp->local_ = Pipeline::instantiate(meta, registry, opts);
        if (dp->local_->aggregate() == AggregateState::failed) {
            std::string causes;
            for (const auto& id : dp->local_->instance_ids())
                if (!dp->local_->failure(id).empty())
                    causes += "\n  " + id + ": " + dp->local_->failure(id);
            dp->stop();
            throw ConfigError("local part failed to instantiate:" + causes);
        }
        dp->local_->start();
    }
    return dp;
}

DistributedPipeline::~DistributedPipeline() { stop(); }

void DistributedPipeline::stop() {
    std::lock_guard lk(mutex_);
    if (stopped_) return;
    stopped_ = true;
    if (local_) local_->stop();
    for (const auto& host : remote_hosts_) {
        const auto& addr = servers_.at(host);
        try {
            ControlClient client(addr.host, addr.port);
            client.teardown(uuid_);
            client.close();
        } catch (const std::exception& e) {
            log_line(LogLevel::warn, "deploy",
                     "teardown on '" + host + "' failed: " + e.what());
        }
    }
}

bool DistributedPipeline::wait_done(std::chrono::milliseconds timeout) {
    if (!local_) return true;
    return local_->wait_done(timeout);
}

} // namespace flexpipe::deploy
