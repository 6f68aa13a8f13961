#include "flexpipe/deploy/daemon.hpp"

#include <json.hpp>

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

json parse_body(const Message& m) {
    const auto p = m.payload();
    return json::parse(p.begin(), p.end());
}

} // namespace

Daemon::Daemon(std::uint16_t port, const KernelRegistry& registry, DeployOptions opts)
    : registry_(registry), opts_(opts), listener_(port) {}

Daemon::~Daemon() {
    shutdown();
    if (accept_thread_.joinable()) accept_thread_.join();
}

void Daemon::start() {
    accept_thread_ = std::thread([this] { run(); });
}

void Daemon::run() {
    log_line(LogLevel::info, "daemon", "listening on :" + std::to_string(listener_.port()));
    while (!shutdown_.load(std::memory_order_relaxed)) {
        auto conn = listener_.accept(std::chrono::milliseconds(200));
        if (!conn) continue;
        std::lock_guard lk(mutex_);
        sessions_.emplace_back(
            [this](transport::ReliableConn c) { handle_session(std::move(c)); },
            std::move(*conn));
    }
    // Drain sessions, then tear down hosted pipelines.
    std::vector<std::thread> sessions;
    {
        std::lock_guard lk(mutex_);
        sessions.swap(sessions_);
    }
    for (auto& s : sessions)
        if (s.joinable()) s.join();
    std::map<std::string, std::unique_ptr<Pipeline>> pipelines;
    {
        std::lock_guard lk(mutex_);
        pipelines.swap(pipelines_);
    }
    for (auto& [uuid, p] : pipelines) {
        log_line(LogLevel::info, "daemon", "tearing down pipeline " + uuid);
        p->stop();
    }
}

void Daemon::shutdown() {
    shutdown_.store(true, std::memory_order_relaxed);
    listener_.stop();
}

std::vector<std::string> Daemon::hosted() const {
    std::lock_guard lk(mutex_);
    std::vector<std::string> out;
    for (const auto& [uuid, _] : pipelines_) out.push_back(uuid);
    return out;
}

void Daemon::handle_session(transport::ReliableConn conn) {
    Message request;
    while (!shutdown_.load(std::memory_order_relaxed)) {
        transport::RecvStatus status;
        try {
            status = conn.recv(request, std::chrono::milliseconds(200));
        } catch (const std::exception& e) {
            // Malformed bytes: reply with the decode error, then drop the
            // session; framing cannot be trusted past this point.
            try {
                conn.send(control_message("flexpipe/error-reply",
                                          json{{"accepted", false}, {"error", e.what()}}));
            } catch (...) {
            }
            break;
        }
        if (status == transport::RecvStatus::end_of_stream) break;
        if (status != transport::RecvStatus::message) continue;
        Message reply;
        try {
            reply = handle_request(request);
        } catch (const std::exception& e) {
            reply = control_message(request.type_tag + kTagReplySuffix,
                                    json{{"accepted", false}, {"error", e.what()}});
        }
        try {
            conn.send(reply);
        } catch (const TransportError&) {
            break;
        }
    }
    conn.close();
}

DeployReply Daemon::do_deploy(const std::string& uuid, const std::string& recipe_text) {
    DeployReply reply;
    {
        std::lock_guard lk(mutex_);
        if (pipelines_.count(uuid)) {
            reply.error = "duplicate pipeline " + uuid;
            return reply;
        }
    }
    recipe::PipelineRecipe part;
    recipe::PipelineMetadata meta;
    try {
        part = recipe::parse_recipe(recipe_text);
        meta = recipe::validate(part, registry_);
    } catch (const recipe::RecipeInvalid& e) {
        for (const auto& v : e.violations()) reply.violations.push_back(v.str());
        return reply;
    } catch (const ConfigError& e) {
        reply.error = e.what();
        return reply;
    }

    auto pipeline = Pipeline::instantiate(meta, registry_, opts_);
    if (pipeline->aggregate() == AggregateState::failed) {
        for (const auto& id : pipeline->instance_ids()) {
            const auto cause = pipeline->failure(id);
            if (!cause.empty()) reply.violations.push_back(id + ": " + cause);
        }
        pipeline->stop(); // nothing may stay half-deployed
        return reply;
    }
    pipeline->start();
    reply.accepted = true;
    reply.ready_ports = pipeline->ready_ports();
    std::lock_guard lk(mutex_);
    pipelines_[uuid] = std::move(pipeline);
    log_line(LogLevel::info, "daemon", "deployed pipeline " + uuid);
    return reply;
}

Message Daemon::handle_request(const Message& request) {
    if (request.type_tag == kTagDeploy) {
        const json body = parse_body(request);
        const std::string uuid = body.at("uuid").get<std::string>();
        const std::string recipe_text = body.at("recipe").get<std::string>();
        // One deploy at a time; instantiation binds ports and must not race
        // another deploy of the same uuid.
        std::lock_guard serial(deploy_mutex_);
        DeployReply r = do_deploy(uuid, recipe_text);
        json jr{{"accepted", r.accepted},
                {"violations", r.violations},
                {"ready_ports", json::array()},
                {"error", r.error}};
        for (const auto& rp : r.ready_ports)
            jr["ready_ports"].push_back({{"instance", rp.instance},
                                         {"port", rp.port_tag},
                                         {"listen_port", rp.listen_port}});
        return control_message(std::string(kTagDeploy) + kTagReplySuffix, jr);
    }
    if (request.type_tag == kTagTeardown) {
        const json body = parse_body(request);
        const std::string uuid = body.at("uuid").get<std::string>();
        std::unique_ptr<Pipeline> pipeline;
        {
            std::lock_guard lk(mutex_);
            auto it = pipelines_.find(uuid);
            if (it != pipelines_.end()) {
                pipeline = std::move(it->second);
                pipelines_.erase(it);
            }
        }
        if (!pipeline)
            return control_message(std::string(kTagTeardown) + kTagReplySuffix,
                                   json{{"accepted", false}, {"error", "unknown pipeline " + uuid}});
        pipeline->stop();
        log_line(LogLevel::info, "daemon", "tore down pipeline " + uuid);
        return control_message(std::string(kTagTeardown) + kTagReplySuffix,
                               json{{"accepted", true}});
    }
    if (request.type_tag == kTagStatus) {
        json pipelines = json::array();
        std::lock_guard lk(mutex_);
        for (const auto& [uuid, p] : pipelines_) {
            pipelines.push_back({{"uuid", uuid},
                                 {"kernels", p->kernel_count()},
                                 {"running", p->aggregate() == AggregateState::running}});
        }
        return control_message(std::string(kTagStatus) + kTagReplySuffix,
                               json{{"accepted", true}, {"pipelines", pipelines}});
    }
    return control_message(request.type_tag + kTagReplySuffix,
                           json{{"accepted", false},
                                {"error", "unknown request tag " + request.type_tag}});
}

} // namespace flexpipe::deploy
