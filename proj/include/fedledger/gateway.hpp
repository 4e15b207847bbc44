#pragma once

#include "fedledger/harness.hpp"

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace fedledger {

struct ApiSession {
    std::string actor;
    Address address;
    Role role = Role::auditor;
};

/// One state-changing API call and the transaction it produced.
struct ApiCall {
    std::string method;
    std::string path;
    std::string actor;
    Digest tx_id;
};

/// HTTP status for a library error: 400 malformed input, 403 role or
/// membership, 404 unknown id, 409 everything that depends on current state.
int http_status(ErrorCode code) noexcept;

/// JSON/HTTP front end over a Simulation. Write endpoints submit exactly one
/// transaction each and leave sealing to /api/sim/seal or /api/sim/step.
class Gateway {
public:
    explicit Gateway(Simulation& sim);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Binds and starts serving on a background thread. Port 0 picks a free
    /// port. Throws Error(PortInUse).
    int start(const std::string& host, int port);
    void stop();
    int port() const noexcept { return port_; }

    std::optional<ApiSession> session_for(const std::string& token) const;
    std::vector<ApiCall> call_log() const;

private:
    void routes();
    void log_call(const std::string& method, const std::string& path, const ApiSession& who, const Digest& tx);

    Simulation& sim_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::atomic<bool> stopping_{false};
    int port_ = 0;
    mutable std::mutex log_mu_;
    std::vector<ApiCall> calls_;
};

}  // namespace fedledger
