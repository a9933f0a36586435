#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "epicsim/engine.hpp"
#include "epicsim/intervention.hpp"

namespace epicsim::gateway {

inline constexpr int kSchemaVersion = 1;

enum class Channel { Raster, Vm, Energy, Weights, Status };
std::string to_string(Channel c);
/// Throws Validation listing the channels.
Channel channel_from(const std::string& s);

enum class ControlType { Pause, Resume, Step, Intervene, Subscribe, Unsubscribe, Snapshot, Restore, Status };
std::string to_string(ControlType t);

struct ControlMessage {
    ControlType type = ControlType::Status;
    std::string request_id;
    std::string token;                   // controller token for mutating commands
    std::uint64_t n = 0;                 // step
    std::optional<Intervention> intervention;
    Channel channel = Channel::Raster;   // subscribe
    std::uint32_t decimation = 1;        // subscribe
    std::optional<std::uint64_t> cursor; // subscribe: resume after this sequence number
    std::uint64_t subscription = 0;      // unsubscribe
    std::string ref;                     // restore: stored snapshot name
    std::optional<nlohmann::json> snapshot; // restore: inline document
};

/// Error codes carried by failed replies.
namespace codes {
inline constexpr const char* kMalformed = "malformed";
inline constexpr const char* kUnknownChannel = "unknown_channel";
inline constexpr const char* kDuplicateId = "duplicate_request_id";
inline constexpr const char* kForbidden = "not_controller";
inline constexpr const char* kRejected = "rejected";
inline constexpr const char* kBadSnapshot = "bad_snapshot";
inline constexpr const char* kUnknownSubscription = "unknown_subscription";
inline constexpr const char* kClosed = "session_closed";
} // namespace codes

struct Reply {
    std::string request_id;
    bool ok = false;
    std::string code;    // empty when ok
    std::string message; // human-readable reason
    nlohmann::json data = nlohmann::json::object();

    nlohmann::json to_json() const;
};

struct ParseError {
    std::string code;
    std::string message;
};

/// Schema check shared by the service and its clients. Returns the parsed
/// message or the error a reply would carry.
std::variant<ControlMessage, ParseError> parse_control(const nlohmann::json& doc);
nlohmann::json control_to_json(const ControlMessage& m);

struct TelemetryFrame {
    Channel channel = Channel::Status;
    std::uint64_t seq = 0;   // per channel, starting at 1
    std::uint64_t epoch = 0; // bumps on restore; t is monotone within an epoch
    double t = 0.0;          // ms
    bool gap = false;        // notice: `payload.dropped` frames were thinned before this one
    nlohmann::json payload;

    nlohmann::json to_json() const;
    static TelemetryFrame from_json(const nlohmann::json& j);
};

/// Length-delimited wire form: decimal byte count, newline, JSON text.
std::string encode_frame(const nlohmann::json& message);
/// Splits a concatenation of encoded frames. Throws Validation on a truncated buffer.
std::vector<nlohmann::json> decode_frames(const std::string& buffer);

struct SessionOptions {
    std::uint32_t vm_every = 1;         // steps between vm samples
    std::uint32_t energy_every = 10;    // steps between energy samples
    std::size_t lossy_capacity = 4096;  // vm/energy frames retained per channel
    std::size_t subscriber_lag = 1024;  // vm/energy frames a subscriber may trail before thinning
};

/// One engine loop with a serialized command inbox and a telemetry hub.
/// Commands execute at step boundaries on the engine thread; subscribers
/// read from per-channel logs through their own cursors, so a slow reader
/// never stalls the simulation.
class Session {
public:
    Session(std::string id, Engine engine, SessionOptions opts = {});
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    const std::string& id() const { return id_; }
    const std::string& controller_token() const { return token_; }

    /// Queues the command and waits for its reply. step(n) replies once the n steps ran.
    Reply handle(const ControlMessage& msg);
    /// Parses then handles; schema errors come back as error replies.
    Reply handle_json(const nlohmann::json& doc);

    /// Frames for a subscription after its cursor, at most `max`. Advances the cursor.
    /// Waits up to `wait` for the first frame when none is ready.
    std::vector<TelemetryFrame> poll(std::uint64_t subscription, std::size_t max,
                                     std::chrono::milliseconds wait = std::chrono::milliseconds(0));
    bool has_subscription(std::uint64_t subscription) const;

    void close();

private:
    struct Command {
        ControlMessage msg;
        std::promise<Reply> done;
    };
    struct ChannelLog {
        std::deque<TelemetryFrame> frames;
        std::uint64_t next_seq = 1;
        bool lossy = false;
        std::size_t capacity = 0; // 0 = unbounded
    };
    struct Subscription {
        Channel channel = Channel::Raster;
        std::uint32_t decimation = 1;
        std::uint64_t cursor = 0; // last delivered seq
        std::uint64_t dropped = 0; // thinned frames not yet announced
    };

    void loop();
    void execute(Command& cmd);
    void publish_step();
    void publish(Channel c, double t, nlohmann::json payload);
    void publish_status(const std::string& event);
    nlohmann::json status_payload() const;
    bool subscribed(Channel c) const;

    std::string id_;
    std::string token_;
    SessionOptions opts_;
    std::unique_ptr<Engine> engine_;

    std::mutex inbox_mu_;
    std::condition_variable inbox_cv_;
    std::deque<std::unique_ptr<Command>> inbox_;
    bool stop_ = false;

    // Engine-thread state
    bool running_ = false;
    std::uint64_t steps_left_ = 0;
    std::unique_ptr<Command> pending_step_;
    std::deque<std::unique_ptr<Command>> deferred_steps_; // step commands queued behind the running one
    std::size_t raster_seen_ = 0;
    std::set<std::string> request_ids_;
    std::map<std::string, nlohmann::json> snapshots_;
    std::uint64_t next_snapshot_ = 1;

    mutable std::mutex hub_mu_;
    std::condition_variable hub_cv_;
    std::map<Channel, ChannelLog> logs_;
    std::map<std::uint64_t, Subscription> subs_;
    std::uint64_t next_sub_ = 1;
    std::uint64_t epoch_ = 0;

    std::thread thread_;
};

/// Session registry used by the network service.
class Registry {
public:
    /// Builds an engine from {"spec": ..., "seed"?: n, "stimulus"?: ...} and starts a paused session.
    std::shared_ptr<Session> create(const nlohmann::json& request, SessionOptions opts = {});
    std::shared_ptr<Session> find(const std::string& id) const;
    bool remove(const std::string& id);
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_ = 1;
};

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8765;
    SessionOptions session;

    /// Host and port from EPICSIM_GATEWAY_HOST / EPICSIM_GATEWAY_PORT when set.
    static ServerConfig from_env();
};

/// HTTP transport around a Registry:
///   POST   /v1/sessions                    create, returns {session, token}
///   POST   /v1/sessions/{id}/control       one ControlMessage, returns Reply
///   GET    /v1/sessions/{id}/stream        ?subscription=&max=&wait_ms=, length-delimited frames
///   GET    /v1/sessions/{id}/snapshot      engine snapshot document
///   PUT    /v1/sessions/{id}/snapshot      restore (needs X-Controller-Token)
///   DELETE /v1/sessions/{id}
///   GET    /v1/schema
class Server {
public:
    explicit Server(ServerConfig cfg = {});
    ~Server();
    /// Binds and serves on a background thread. Returns the bound port (useful with port 0).
    int start();
    /// Blocks serving on the calling thread.
    void run();
    void stop();
    Registry& registry() { return registry_; }

private:
    struct Impl;
    ServerConfig cfg_;
    Registry registry_;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
};

} // namespace epicsim::gateway
