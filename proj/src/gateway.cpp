#include "fedledger/gateway.hpp"

#include "fedledger/error.hpp"

#include "httplib.h"

#include <charconv>
#include <chrono>
#include <functional>
#include <initializer_list>

namespace fedledger {

int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::BadArgs:
        case ErrorCode::SchemaError:
        case ErrorCode::ParseError:
        case ErrorCode::DecodeError:
        case ErrorCode::BadQrPayload:
        case ErrorCode::BadTimeslot:
        case ErrorCode::NonPositiveValue:
        case ErrorCode::NegativeAmount:
        case ErrorCode::BadTarget:
        case ErrorCode::UnknownMethod:
        case ErrorCode::UnknownContract:
            return 400;
        case ErrorCode::Forbidden:
        case ErrorCode::NotMember:
        case ErrorCode::NotDso:
        case ErrorCode::NotFleetManager:
        case ErrorCode::NotEvOwner:
        case ErrorCode::NotAuthority:
        case ErrorCode::NotTokenAuthority:
        case ErrorCode::NotPermissioned:
        case ErrorCode::WrongPayloadKind:
            return 403;
        case ErrorCode::UnknownLedger:
        case ErrorCode::UnknownRequest:
        case ErrorCode::UnknownEv:
        case ErrorCode::LotNotFound:
        case ErrorCode::TxNotFound:
            return 404;
        default:
            return 409;
    }
}

namespace {

std::uint64_t parse_count(const std::string& text) {
    std::uint64_t v = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size()) throw std::invalid_argument(text);
    return v;
}

struct Reply {
    int status = 200;
    nlohmann::json body;
};

using Handler = std::function<Reply(const httplib::Request&, const std::optional<ApiSession>&)>;

const ApiSession& require_role(const std::optional<ApiSession>& s, std::initializer_list<Role> roles) {
    if (!s) throw Error(ErrorCode::Forbidden, "missing bearer token");
    for (auto r : roles) {
        if (s->role == r) return *s;
    }
    throw Error(ErrorCode::Forbidden, std::string("role ") + std::string(to_string(s->role)) + " may not do this");
}

const ApiSession& require_writer(const std::optional<ApiSession>& s) {
    return require_role(s, {Role::dso, Role::fleet_manager, Role::ev_user});
}

nlohmann::json body_of(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::SchemaError, "body must be a JSON object");
    return j;
}

std::int64_t field(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer()) throw Error(ErrorCode::SchemaError, std::string("integer '") + key + "' required");
    return it->get<std::int64_t>();
}

std::string text_field(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw Error(ErrorCode::SchemaError, std::string("string '") + key + "' required");
    return it->get<std::string>();
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& detail) {
    res.status = http_status(code);
    res.set_content(nlohmann::json{{"error", to_string(code)}, {"detail", detail}}.dump(), "application/json");
}

std::string sse_frame(const EventEnvelope& e) {
    return "id: " + std::to_string(e.seq) + "\nevent: " + e.kind + "\ndata: " + nlohmann::json(e).dump() + "\n\n";
}

}  // namespace

Gateway::Gateway(Simulation& sim) : sim_(sim), server_(std::make_unique<httplib::Server>()) {
    // httplib defaults to SO_REUSEPORT, which would let two gateways share a port.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
}

Gateway::~Gateway() { stop(); }

std::optional<ApiSession> Gateway::session_for(const std::string& token) const {
    if (token.empty()) return std::nullopt;
    for (const auto& a : sim_.scenario().actors) {
        if (a.token == token && a.role) return ApiSession{a.name, sim_.wallets().get(a.name).address(), *a.role};
    }
    return std::nullopt;
}

std::vector<ApiCall> Gateway::call_log() const {
    std::lock_guard lock(log_mu_);
    return calls_;
}

void Gateway::log_call(const std::string& method, const std::string& path, const ApiSession& who, const Digest& tx) {
    std::lock_guard lock(log_mu_);
    calls_.push_back({method, path, who.actor, tx});
}

int Gateway::start(const std::string& host, int port) {
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        if (port_ < 0) throw Error(ErrorCode::PortInUse, "no free port");
    } else {
        if (!server_->bind_to_port(host, port)) throw Error(ErrorCode::PortInUse, host + ":" + std::to_string(port));
        port_ = port;
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void Gateway::stop() {
    stopping_ = true;
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

void Gateway::routes() {
    auto& srv = *server_;

    auto wrap = [this](Handler h) {
        return [this, h](const httplib::Request& req, httplib::Response& res) {
            try {
                std::optional<ApiSession> session;
                if (req.has_header("Authorization")) {
                    auto header = req.get_header_value("Authorization");
                    const std::string prefix = "Bearer ";
                    if (header.rfind(prefix, 0) != 0) throw Error(ErrorCode::Forbidden, "expected a bearer token");
                    session = session_for(header.substr(prefix.size()));
                    if (!session) throw Error(ErrorCode::Forbidden, "unknown token");
                }
                std::lock_guard lock(sim_.mutex());
                auto reply = h(req, session);
                res.status = reply.status;
                res.set_content(reply.body.dump(), "application/json");
            } catch (const Error& e) {
                send_error(res, e.code(), e.what());
            } catch (const nlohmann::json::exception& e) {
                send_error(res, ErrorCode::SchemaError, e.what());
            }
        };
    };

    auto market_ledger = [this]() -> std::string {
        if (!sim_.market()) throw Error(ErrorCode::UnknownLedger, "no market configured");
        return sim_.market()->config().ledger;
    };

    // ------------------------------------------------------------ ledgers

    srv.Get("/api/ledgers", wrap([this](const httplib::Request&, const std::optional<ApiSession>&) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& id : sim_.federation().ledger_ids()) {
            const auto& l = sim_.federation().ledger(id);
            auto tip = l.tip();
            out.push_back({{"ledger_id", id},
                           {"kind", to_string(l.config().kind)},
                           {"height", tip.height},
                           {"tip", tip.hash.hex()},
                           {"restricted_read", l.config().restricted_read}});
        }
        return Reply{200, out};
    }));

    srv.Get(R"(/api/ledgers/([^/]+)/blocks)", wrap([this](const httplib::Request& req, const std::optional<ApiSession>& s) {
        const auto& l = sim_.federation().ledger(req.matches[1].str());
        if (l.config().restricted_read) {
            auto members = l.members();
            bool reader = s && (members.count(s->address) || l.config().authority == s->address ||
                                l.config().minter == s->address);
            if (!reader) throw Error(ErrorCode::Forbidden, "ledger is read-restricted to its members");
        }
        std::uint64_t from = 0;
        if (req.has_param("from")) {
            try {
                from = std::stoull(req.get_param_value("from"));
            } catch (const std::exception&) {
                throw Error(ErrorCode::SchemaError, "from must be a block height");
            }
        }
        return Reply{200, l.blocks(from)};
    }));

    // ------------------------------------------------------------ anchors

    srv.Get("/api/anchors", wrap([this](const httplib::Request&, const std::optional<ApiSession>&) {
        return Reply{200, sim_.anchor_checkpoints()};
    }));

    srv.Post("/api/anchors/verify", wrap([this](const httplib::Request&, const std::optional<ApiSession>&) {
        if (!sim_.scenario().anchoring) throw Error(ErrorCode::NoCheckpoints, "no anchoring configured");
        auto r = sim_.verify_anchors_now();
        if (!r) throw Error(ErrorCode::NoCheckpoints);
        return Reply{200, *r};
    }));

    // ----------------------------------------------------------- requests

    srv.Get("/api/requests", wrap([this](const httplib::Request&, const std::optional<ApiSession>&) {
        if (!sim_.market()) return Reply{200, nlohmann::json::array()};
        return Reply{200, sim_.market()->requests()};
    }));

    srv.Post("/api/requests", wrap([this, market_ledger](const httplib::Request& req, const std::optional<ApiSession>& s) {
        const auto& who = require_role(s, {Role::dso});
        auto b = body_of(req);
        FlexRequest r;
        if (b.contains("id")) r.id = text_field(b, "id");
        auto sc = scenario_from_string(b.value("scenario", std::string("intraday")));
        if (!sc) throw Error(ErrorCode::SchemaError, "scenario must be day_ahead or intraday");
        r.scenario = *sc;
        r.energy_wh = field(b, "energy_wh");
        r.slot = {field(b, "start"), field(b, "end")};
        r.location = {field(b, "lat"), field(b, "lon")};
        r.radius_m = b.contains("radius_m") ? field(b, "radius_m") : 0;
        r.incentive_tokens = field(b, "incentive");
        auto tx = sim_.submit(who.actor, market_ledger(), post_request_call(r));
        log_call("POST", req.path, who, tx);
        auto id = r.id.empty() ? "REQ-" + tx.hex().substr(0, 12) : r.id;
        return Reply{202, {{"tx_id", tx.hex()}, {"request", id}}};
    }));

    srv.Post(R"(/api/requests/([^/]+)/offers)",
             wrap([this, market_ledger](const httplib::Request& req, const std::optional<ApiSession>& s) {
                 const auto& who = require_role(s, {Role::fleet_manager});
                 auto b = body_of(req);
                 auto tx = sim_.submit(who.actor, market_ledger(),
                                       post_offer_call(req.matches[1].str(), field(b, "price"), field(b, "committed_wh")));
                 log_call("POST", req.path, who, tx);
                 return Reply{202, {{"tx_id", tx.hex()}}};
             }));

    srv.Post(R"(/api/requests/([^/]+)/close)",
             wrap([this, market_ledger](const httplib::Request& req, const std::optional<ApiSession>& s) {
                 const auto& who = require_role(s, {Role::dso});
                 auto tx = sim_.submit(who.actor, market_ledger(), close_call(req.matches[1].str()));
                 log_call("POST", req.path, who, tx);
                 return Reply{202, {{"tx_id", tx.hex()}}};
             }));

    srv.Get(R"(/api/requests/([^/]+)/candidates)", wrap([this](const httplib::Request& req, const std::optional<ApiSession>&) {
        if (!sim_.market()) throw Error(ErrorCode::UnknownRequest, req.matches[1].str());
        nlohmann::json out = nlohmann::json::array();
        for (const auto& c : sim_.market()->candidates(req.matches[1].str()))
            out.push_back({{"ev", c.ev}, {"distance_m", c.distance_m}});
        return Reply{200, out};
    }));

    srv.Post(R"(/api/assignments/([^/]+)/accept)",
             wrap([this, market_ledger](const httplib::Request& req, const std::optional<ApiSession>& s) {
                 const auto& who = require_role(s, {Role::ev_user});
                 auto b = body_of(req);
                 auto tx = sim_.submit(who.actor, market_ledger(),
                                       accept_call(req.matches[1].str(), text_field(b, "ev"), text_field(b, "station")));
                 log_call("POST", req.path, who, tx);
                 return Reply{202, {{"tx_id", tx.hex()}}};
             }));

    srv.Post(R"(/api/requests/([^/]+)/settle)",
             wrap([this, market_ledger](const httplib::Request& req, const std::optional<ApiSession>& s) {
                 const auto& who = require_role(s, {Role::dso});
                 auto tx = sim_.submit(who.actor, market_ledger(), settle_request_call(req.matches[1].str()));
                 log_call("POST", req.path, who, tx);
                 return Reply{202, {{"tx_id", tx.hex()}}};
             }));

    // ---------------------------------------------------------- provenance

    srv.Get(R"(/api/trace/([^/]+))", wrap([this](const httplib::Request& req, const std::optional<ApiSession>&) {
        if (!sim_.foodchain()) throw Error(ErrorCode::LotNotFound, req.matches[1].str());
        return Reply{200, sim_.foodchain()->trace_lot(req.matches[1].str())};
    }));

    srv.Get(R"(/api/qr/(.+))", wrap([this](const httplib::Request& req, const std::optional<ApiSession>&) {
        if (!sim_.foodchain()) throw Error(ErrorCode::LotNotFound, "no food chain configured");
        return Reply{200, sim_.foodchain()->resolve_qr(req.matches[1].str())};
    }));

    // ---------------------------------------------------------- simulation

    srv.Post("/api/sim/step", wrap([this](const httplib::Request& req, const std::optional<ApiSession>& s) {
        require_writer(s);
        auto b = body_of(req);
        auto ticks = b.contains("ticks") ? field(b, "ticks") : 1;
        if (ticks < 0 || ticks > 1'000'000) throw Error(ErrorCode::SchemaError, "ticks out of range");
        sim_.step_ticks(ticks);
        return Reply{200, {{"now", sim_.federation().now()}}};
    }));

    srv.Post("/api/sim/seal", wrap([this](const httplib::Request& req, const std::optional<ApiSession>& s) {
        require_writer(s);
        auto b = body_of(req);
        std::optional<std::string> ledger;
        if (b.contains("ledger")) {
            ledger = text_field(b, "ledger");
            sim_.federation().ledger(*ledger);  // 404 before sealing anything
        }
        sim_.seal(ledger);
        nlohmann::json heights = nlohmann::json::object();
        for (const auto& id : sim_.federation().ledger_ids()) heights[id] = sim_.federation().ledger(id).height();
        return Reply{200, {{"now", sim_.federation().now()}, {"heights", heights}}};
    }));

    // -------------------------------------------------------------- events

    srv.Get("/api/events", [this](const httplib::Request& req, httplib::Response& res) {
        std::uint64_t since = 0;
        std::optional<std::uint64_t> limit;
        try {
            if (req.has_param("since")) since = parse_count(req.get_param_value("since"));
            if (req.has_param("limit")) limit = parse_count(req.get_param_value("limit"));
        } catch (const std::exception&) {
            return send_error(res, ErrorCode::SchemaError, "since and limit must be non-negative integers");
        }
        const auto& log = sim_.federation().events();
        bool json = req.get_param_value("format") == "json" ||
                    (req.has_header("Accept") && req.get_header_value("Accept").find("text/event-stream") == std::string::npos &&
                     req.get_header_value("Accept").find("application/json") != std::string::npos);
        if (json) {
            auto events = log.since(since);
            if (limit && events.size() > *limit) events.resize(*limit);
            res.set_content(nlohmann::json(events).dump(), "application/json");
            return;
        }
        res.set_header("Cache-Control", "no-cache");
        auto cursor = std::make_shared<std::uint64_t>(since);
        auto sent = std::make_shared<std::uint64_t>(0);
        res.set_chunked_content_provider("text/event-stream", [this, &log, cursor, sent, limit](std::size_t, httplib::DataSink& sink) {
            if (stopping_ || !sink.is_writable()) return false;
            auto events = log.since(*cursor);
            if (events.empty()) {
                log.wait_beyond(*cursor, std::chrono::milliseconds(200));
                return true;
            }
            for (const auto& e : events) {
                auto frame = sse_frame(e);
                if (!sink.write(frame.data(), frame.size())) return false;
                *cursor = e.seq;
                if (limit && ++*sent >= *limit) {
                    sink.done();
                    return true;
                }
            }
            return true;
        });
    });
}

}  // namespace fedledger
