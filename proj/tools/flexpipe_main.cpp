#include <CLI11.hpp>

#include <atomic>
#include <condition_variable>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "flexpipe/metrics/bench.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitUsage = 64;

std::atomic<bool> g_interrupted{false};
std::mutex g_signal_mutex;
std::condition_variable g_signal_cv;

void on_signal(int) {
    g_interrupted.store(true);
    g_signal_cv.notify_all();
}

void install_signal_handlers() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
}

bool wait_interrupted(std::chrono::milliseconds d) {
    std::unique_lock lk(g_signal_mutex);
    return g_signal_cv.wait_for(lk, d, [] { return g_interrupted.load(); });
}

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw flexpipe::Error("cannot read " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

flexpipe::deploy::ServerMap parse_servers(const std::vector<std::string>& entries) {
    flexpipe::deploy::ServerMap servers;
    for (const auto& entry : entries) {
        const auto eq = entry.find('=');
        const auto colon = entry.rfind(':');
        if (eq == std::string::npos || colon == std::string::npos || colon < eq)
            throw flexpipe::ConfigError("--server expects name=host:port, got '" + entry + "'");
        const std::string name = entry.substr(0, eq);
        const std::string host = entry.substr(eq + 1, colon - eq - 1);
        const int port = std::stoi(entry.substr(colon + 1));
        if (port < 1 || port > 65535)
            throw flexpipe::ConfigError("--server port out of range in '" + entry + "'");
        servers[name] = {host, static_cast<std::uint16_t>(port)};
    }
    return servers;
}

int cmd_validate(const std::string& recipe_path) {
    using namespace flexpipe;
    std::string text;
    try {
        text = read_file(recipe_path);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return kExitRuntime;
    }
    try {
        auto recipe = recipe::parse_recipe(text);
        auto registry = kernels::default_registry();
        auto meta = recipe::validate(recipe, registry);
        (void)recipe::split_recipe(recipe);
        std::cout << "recipe OK: " << meta.kernels.size() << " kernels, "
                  << meta.local_edges.size() << " local edges, " << meta.remote_edges.size()
                  << " remote edges\n";
        return kExitOk;
    } catch (const recipe::RecipeInvalid& e) {
        for (const auto& v : e.violations()) std::cerr << v.str() << "\n";
        return kExitValidation;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    }
}

int cmd_serve(std::uint16_t port) {
    using namespace flexpipe;
    try {
        auto registry = kernels::default_registry();
        deploy::Daemon daemon(port, registry);
        std::cout << "daemon listening on :" << daemon.port() << "\n" << std::flush;
        daemon.start();
        while (!wait_interrupted(std::chrono::milliseconds(200))) {
        }
        std::cout << "shutting down\n";
        daemon.shutdown();
        return kExitOk;
    } catch (const TransportError& e) {
        std::cerr << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_run(const std::string& recipe_path, const std::vector<std::string>& server_entries) {
    using namespace flexpipe;
    try {
        const auto text = read_file(recipe_path);
        auto recipe = recipe::parse_recipe(text);
        auto registry = kernels::default_registry();
        (void)recipe::validate(recipe, registry);
        auto servers = parse_servers(server_entries);

        bool needs_remote = false;
        for (const auto& [id, host] : recipe.placements)
            if (host != recipe::kLocalHost) needs_remote = true;

        std::unique_ptr<deploy::Pipeline> local;
        std::unique_ptr<deploy::DistributedPipeline> distributed;
        deploy::Pipeline* pipeline = nullptr;
        if (needs_remote) {
            distributed = deploy::DistributedPipeline::deploy(recipe, registry, servers);
            pipeline = &distributed->local();
        } else {
            auto meta = recipe::validate(recipe, registry);
            local = deploy::Pipeline::instantiate(meta, registry);
            if (local->aggregate() == deploy::AggregateState::failed) {
                for (const auto& id : local->instance_ids())
                    if (!local->failure(id).empty())
                        std::cerr << id << ": " << local->failure(id) << "\n";
                return kExitRuntime;
            }
            local->start();
            pipeline = local.get();
        }

        std::cout << "pipeline running (" << pipeline->kernel_count()
                  << " local kernels); interrupt to stop\n"
                  << std::flush;
        while (!g_interrupted.load()) {
            if (pipeline->wait_done(std::chrono::milliseconds(0))) break;
            wait_interrupted(std::chrono::milliseconds(100));
        }

        if (distributed)
            distributed->stop();
        else
            local->stop();

        std::uint64_t total = 0;
        for (const auto& id : pipeline->instance_ids()) {
            if (auto* sink = dynamic_cast<kernels::Sink*>(pipeline->kernel(id))) {
                std::cout << "sink " << id << ": " << sink->count() << " messages\n";
                total += sink->count();
            }
        }
        std::cout << "done; " << total << " messages recorded\n";
        return kExitOk;
    } catch (const recipe::RecipeInvalid& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_bench(const std::string& recipe_path, const std::vector<std::string>& server_entries,
              double duration_s, double warmup_s, const std::string& out,
              const std::string& format, const std::string& label) {
    using namespace flexpipe;
    try {
        const auto text = read_file(recipe_path);
        auto recipe = recipe::parse_recipe(text);
        auto registry = kernels::default_registry();

        metrics::BenchOptions opts;
        opts.duration_s = duration_s;
        opts.warmup_s = warmup_s;
        opts.servers = parse_servers(server_entries);
        opts.label = label;

        auto report = metrics::bench(recipe, registry, opts);

        if (!out.empty()) {
            if (format == "json")
                metrics::write_json(report, out);
            else
                metrics::write_csv(report, out);
            std::cout << "report written to " << out << "\n";
        }
        std::cout << "scenario " << report.scenario << ": end-to-end mean "
                  << report.end_to_end.mean_ms << " ms, throughput " << report.throughput
                  << " msgs/s" << (report.degenerate ? " (degenerate: no sink messages)" : "")
                  << "\n";
        return report.degenerate ? kExitRuntime : kExitOk;
    } catch (const recipe::RecipeInvalid& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_scenarios(const std::vector<std::string>& report_paths) {
    using namespace flexpipe;
    try {
        std::vector<metrics::MetricsReport> reports;
        for (const auto& path : report_paths) reports.push_back(metrics::read_report(path));
        std::cout << metrics::compare_table(reports);
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return kExitRuntime;
    }
}

} // namespace

int main(int argc, char** argv) {
    flexpipe::init_log_from_env();
    install_signal_handlers();

    CLI::App app{"flexpipe: recipe-configured dataflow pipelines, local or distributed"};
    app.require_subcommand(1);

    std::string log_level;
    app.add_option("--log-level", log_level, "off|error|warn|info|debug");

    std::string recipe_path;
    std::vector<std::string> servers;
    std::uint16_t port = 0;
    double duration_s = 10.0, warmup_s = 1.0;
    std::string out, format = "csv", label;
    std::vector<std::string> report_paths;

    auto* validate = app.add_subcommand("validate", "parse and validate a recipe");
    validate->add_option("--recipe", recipe_path, "recipe path")->required();

    auto* run = app.add_subcommand("run", "deploy and run a pipeline until interrupted");
    run->add_option("--recipe", recipe_path, "recipe path")->required();
    run->add_option("--server", servers, "name=host:port of a deployment daemon")
        ->take_all();

    auto* serve = app.add_subcommand("serve", "run the deployment daemon");
    serve->add_option("--port", port, "control port")->required();

    auto* bench = app.add_subcommand("bench", "run a measured benchmark");
    bench->add_option("--recipe", recipe_path, "recipe path")->required();
    bench->add_option("--server", servers, "name=host:port of a deployment daemon")->take_all();
    bench->add_option("--duration-s", duration_s, "measured duration");
    bench->add_option("--warmup-s", warmup_s, "discarded warmup");
    bench->add_option("--out", out, "report output path");
    bench->add_option("--format", format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    bench->add_option("--label", label, "scenario label (workload/scenario)");

    auto* scenarios = app.add_subcommand("scenarios", "compare benchmark reports");
    scenarios->add_option("reports", report_paths, "report files (.csv or .json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (!log_level.empty() && !flexpipe::set_log_level(log_level)) {
        std::cerr << "unknown log level '" << log_level << "'\n";
        return kExitUsage;
    }
    flexpipe::init_log_from_env(); // FLEXPIPE_LOG overrides the flag

    if (validate->parsed()) return cmd_validate(recipe_path);
    if (serve->parsed()) return cmd_serve(port);
    if (run->parsed()) return cmd_run(recipe_path, servers);
    if (bench->parsed()) {
        if (duration_s <= 0 || warmup_s < 0 || duration_s < warmup_s) {
            std::cerr << "bench requires duration-s > 0 and duration-s >= warmup-s >= 0\n";
            return kExitUsage;
        }
        return cmd_bench(recipe_path, servers, duration_s, warmup_s, out, format, label);
    }
    if (scenarios->parsed()) {
        if (report_paths.empty()) {
            std::cerr << "scenarios requires at least one report path\n";
            return kExitUsage;
        }
        return cmd_scenarios(report_paths);
    }
    return kExitUsage;
}
