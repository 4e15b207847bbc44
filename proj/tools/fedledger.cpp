// Command-line front end: run scenarios, verify persisted chains, ingest
// platform feeds, trace lots, drive the flexibility market, serve the API.

#include "fedledger/error.hpp"
#include "fedledger/gateway.hpp"
#include "fedledger/harness.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

using namespace fedledger;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 2;
constexpr int kExitSchema = 3;

volatile std::sig_atomic_t g_stop = 0;

Scenario load_with_seed(const std::string& path, std::optional<std::uint64_t> seed) {
    auto s = load_scenario(path);
    if (seed) s.seed = *seed;
    return s;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) throw Error(ErrorCode::IoError, "cannot write " + path);
}

int cmd_run(const std::string& scenario_path, std::optional<std::uint64_t> seed, const std::string& out,
            const std::string& chain_dir) {
    auto scenario = load_with_seed(scenario_path, seed);
    Simulation sim(scenario);
    sim.run();
    auto report = sim.report();
    if (!out.empty()) write_file(out, report_text(report));
    if (!chain_dir.empty()) {
        std::filesystem::create_directories(chain_dir);
        for (const auto& id : sim.federation().ledger_ids()) save_chain(chain_dir, sim.federation().ledger(id));
    }
    std::cout << summarize(report);
    return sim.ok() ? kExitOk : kExitFailed;
}

int cmd_verify(const std::string& dir) {
    bool all_ok = true;
    std::size_t n = 0;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".chain") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& chain : files) {
        auto sidecar = chain;
        sidecar.replace_extension(".json");
        auto r = verify_chain_file(chain, sidecar);
        ++n;
        all_ok = all_ok && r.ok;
        std::cout << chain.stem().string() << ": "
                  << (r.ok ? "ok" : "INVALID at height " + std::to_string(*r.first_bad_height) + " (" + r.reason + ")")
                  << "\n";
    }
    if (n == 0) throw Error(ErrorCode::IoError, "no .chain files in " + dir);
    return all_ok ? kExitOk : kExitFailed;
}

int cmd_ingest(const std::string& platform, const std::string& rules_path, const std::string& in_path) {
    std::ifstream rules_in(rules_path);
    if (!rules_in) throw Error(ErrorCode::IoError, "cannot open " + rules_path);
    auto rules_json = nlohmann::json::parse(rules_in);
    if (rules_json.is_object()) rules_json = rules_json.at("adapter_rules");
    auto rules = rules_json.get<std::vector<AdapterRule>>();

    // Standalone: one open ledger per rule target, signers derived with seed 0.
    Federation fed;
    WalletBook wallets;
    for (const auto& r : rules) {
        wallets.add(r.signer, 0);
        if (!fed.has_ledger(r.ledger)) fed.add_ledger(LedgerConfig{r.ledger, LedgerKind::open, {}, {}, {}, false, {}});
    }
    std::ifstream in(in_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + in_path);
    EventIngestor ingestor;
    auto result = ingestor.ingest(in, platform);

    std::vector<MappedCall> mapped;
    std::vector<SubmitFailure> unmapped;
    for (const auto& e : result.accepted) {
        try {
            mapped.push_back(map_event(e, rules));
        } catch (const Error& err) {
            unmapped.push_back({"", e.idempotency_key().hex(), err.code()});
        }
    }
    auto report = flush_batch(std::move(mapped), fed, [&](const std::string& n) -> Wallet& { return wallets.get(n); });
    report.failures.insert(report.failures.begin(), unmapped.begin(), unmapped.end());
    fed.seal_pending();

    nlohmann::json out{{"accepted", result.accepted.size()},
                       {"rejected", result.rejected},
                       {"unique_keys", ingestor.unique_keys()},
                       {"submission", report}};
    nlohmann::json heights = nlohmann::json::object();
    for (const auto& id : fed.ledger_ids()) heights[id] = fed.ledger(id).height();
    out["heights"] = heights;
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

int cmd_trace(const std::string& lot, const std::string& scenario_path, const std::string& format) {
    Simulation sim(load_scenario(scenario_path));
    sim.run();
    if (!sim.foodchain()) throw Error(ErrorCode::LotNotFound, "scenario has no food chain");
    auto report = sim.foodchain()->trace_lot(lot);
    if (format == "text") {
        std::cout << report.to_text();
    } else {
        std::cout << nlohmann::json(report).dump(2) << "\n";
    }
    return kExitOk;
}

int cmd_plan(const std::string& forecast_path, std::int64_t lat, std::int64_t lon, std::int64_t radius,
             const TokenRate& rate) {
    std::ifstream in(forecast_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + forecast_path);
    auto forecast = nlohmann::json::parse(in).get<PowerForecast>();
    std::cout << nlohmann::json(plan_day_ahead(forecast, {lat, lon}, radius, rate)).dump(2) << "\n";
    return kExitOk;
}

int cmd_market_op(const std::string& op, const std::string& request, const std::string& scenario_path) {
    Simulation sim(load_scenario(scenario_path));
    sim.run();
    if (!sim.market()) throw Error(ErrorCode::UnknownRequest, "scenario has no market");
    const auto& cfg = sim.market()->config();
    auto call = op == "close" ? close_call(request) : settle_request_call(request);
    sim.submit(cfg.dso, cfg.ledger, call);
    sim.seal(cfg.ledger);
    sim.drain();
    auto r = sim.market()->request(request);
    nlohmann::json out{{"request", r ? nlohmann::json(*r) : nlohmann::json(nullptr)}};
    for (const auto& run : sim.market()->settlement_runs()) {
        if (run.request == request) out["settlement"] = run;
    }
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

int cmd_serve(const std::string& scenario_path, const std::string& host, int port, bool run_script) {
    Simulation sim(load_scenario(scenario_path));
    if (run_script) {
        for (const auto& step : sim.scenario().script) sim.run_step(step);
    }
    Gateway gateway(sim);
    auto bound = gateway.start(host, port);
    std::cerr << "serving " << sim.scenario().name << " on http://" << host << ":" << bound << "\n";
    std::signal(SIGINT, [](int) { g_stop = 1; });
    std::signal(SIGTERM, [](int) { g_stop = 1; });
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    gateway.stop();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated ledger toolkit"};
    app.require_subcommand(1);

    std::string scenario, out, chain_dir, platform, rules, input, lot, format = "json", forecast, request;
    std::optional<std::uint64_t> seed;
    std::string host = "127.0.0.1";
    int port = 8080;
    bool run_script = false;
    std::int64_t lat = 0, lon = 0, radius = 0;
    TokenRate rate;

    auto* run = app.add_subcommand("run", "Run a scenario and write its report");
    run->add_option("--scenario", scenario, "Scenario JSON")->required();
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--out", out, "Report output path");
    run->add_option("--chain-dir", chain_dir, "Persist every ledger here after the run");

    auto* verify = app.add_subcommand("verify", "Verify persisted chains");
    verify->add_option("--chain-dir", chain_dir)->required();

    auto* ingest = app.add_subcommand("ingest", "Validate and submit an NDJSON platform feed");
    ingest->add_option("--platform", platform)->required();
    ingest->add_option("--rules", rules, "Adapter rules JSON")->required();
    ingest->add_option("--in", input, "NDJSON input")->required();

    auto* trace = app.add_subcommand("trace", "Trace a lot after running a scenario");
    trace->add_option("lot", lot)->required();
    trace->add_option("--scenario", scenario)->required();
    trace->add_option("--format", format)->check(CLI::IsMember({"json", "text"}));

    auto* market = app.add_subcommand("market", "Flexibility market operations");
    market->require_subcommand(1);
    auto* plan = market->add_subcommand("plan-day-ahead", "Requests for every surplus slot of a forecast");
    plan->add_option("--forecast", forecast)->required();
    plan->add_option("--lat", lat, "Zone latitude (micro-degrees)");
    plan->add_option("--lon", lon, "Zone longitude (micro-degrees)");
    plan->add_option("--radius", radius, "Zone radius (m)");
    plan->add_option("--tokens", rate.tokens, "Tokens per --per-wh");
    plan->add_option("--per-wh", rate.per_wh);
    auto* close = market->add_subcommand("close", "Close bidding on a request");
    auto* settle = market->add_subcommand("settle", "Settle a request");
    for (auto* sub : {close, settle}) {
        sub->add_option("request", request)->required();
        sub->add_option("--scenario", scenario)->required();
    }

    auto* serve = app.add_subcommand("serve", "Serve the HTTP API over a scenario");
    serve->add_option("--scenario", scenario)->required();
    serve->add_option("--host", host);
    serve->add_option("--port", port);
    serve->add_flag("--run-script", run_script, "Play the scenario script before serving");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(scenario, seed, out, chain_dir);
        if (*verify) return cmd_verify(chain_dir);
        if (*ingest) return cmd_ingest(platform, rules, input);
        if (*trace) return cmd_trace(lot, scenario, format);
        if (*plan) return cmd_plan(forecast, lat, lon, radius, rate);
        if (*close) return cmd_market_op("close", request, scenario);
        if (*settle) return cmd_market_op("settle", request, scenario);
        if (*serve) return cmd_serve(scenario, host, port, run_script);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::SchemaError ? kExitSchema : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
