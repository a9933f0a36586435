#include "epicsim/gateway.hpp"

#include <algorithm>
#include <iomanip>
#include <random>
#include <sstream>

#include "epicsim/error.hpp"
#include "epicsim/fabric.hpp"
#include "epicsim/spec.hpp"

namespace epicsim::gateway {

namespace {

const std::vector<std::pair<std::string, Channel>> kChannels{{"raster", Channel::Raster},
                                                              {"vm", Channel::Vm},
                                                              {"energy", Channel::Energy},
                                                              {"weights", Channel::Weights},
                                                              {"status", Channel::Status}};

const std::vector<std::pair<std::string, ControlType>> kTypes{
    {"pause", ControlType::Pause},         {"resume", ControlType::Resume},           {"step", ControlType::Step},
    {"intervene", ControlType::Intervene}, {"subscribe", ControlType::Subscribe},     {"unsubscribe", ControlType::Unsubscribe},
    {"snapshot", ControlType::Snapshot},   {"restore", ControlType::Restore},         {"status", ControlType::Status}};

bool lossy(Channel c) { return c == Channel::Vm || c == Channel::Energy || c == Channel::Weights; }

bool mutating(ControlType t) {
    return t == ControlType::Pause || t == ControlType::Resume || t == ControlType::Step ||
           t == ControlType::Intervene || t == ControlType::Restore;
}

std::string random_token() {
    std::random_device rd;
    std::ostringstream os;
    for (int i = 0; i < 4; ++i) os << std::hex << std::setw(8) << std::setfill('0') << rd();
    return os.str();
}

Reply error_reply(const std::string& id, const std::string& code, const std::string& message) {
    return {id, false, code, message, nlohmann::json::object()};
}

Reply ok_reply(const std::string& id, nlohmann::json data = nlohmann::json::object()) {
    return {id, true, "", "", std::move(data)};
}

} // namespace

std::string to_string(Channel c) {
    for (const auto& [name, ch] : kChannels)
        if (ch == c) return name;
    return "status";
}

Channel channel_from(const std::string& s) {
    for (const auto& [name, ch] : kChannels)
        if (name == s) return ch;
    fail(ErrorKind::Validation, "unknown channel '" + s + "' (expected one of: raster, vm, energy, weights, status)");
}

std::string to_string(ControlType t) {
    for (const auto& [name, ty] : kTypes)
        if (ty == t) return name;
    return "status";
}

nlohmann::json Reply::to_json() const {
    nlohmann::json j{{"request_id", request_id}, {"ok", ok}, {"data", data}, {"schema", kSchemaVersion}};
    if (!ok) j["error"] = {{"code", code}, {"message", message}};
    return j;
}

namespace {
// Signed JSON integers count too; clients rarely build unsigned literals.
bool is_count(const nlohmann::json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}
} // namespace

std::variant<ControlMessage, ParseError> parse_control(const nlohmann::json& doc) {
    const auto bad = [](std::string msg) { return ParseError{codes::kMalformed, std::move(msg)}; };
    if (!doc.is_object()) return bad("message must be an object");
    if (doc.contains("schema") && doc["schema"] != kSchemaVersion)
        return bad("schema: unsupported version (this gateway speaks " + std::to_string(kSchemaVersion) + ")");
    if (!doc.contains("type") || !doc["type"].is_string()) return bad("type: required string");
    if (!doc.contains("request_id") || !doc["request_id"].is_string() || doc["request_id"].get<std::string>().empty())
        return bad("request_id: required non-empty string");

    ControlMessage m;
    m.request_id = doc["request_id"].get<std::string>();
    const auto type = doc["type"].get<std::string>();
    const auto it = std::find_if(kTypes.begin(), kTypes.end(), [&](const auto& p) { return p.first == type; });
    if (it == kTypes.end())
        return bad("type: unknown value '" + type +
                   "' (expected one of: pause, resume, step, intervene, subscribe, unsubscribe, snapshot, restore, status)");
    m.type = it->second;
    if (doc.contains("token")) {
        if (!doc["token"].is_string()) return bad("token: must be a string");
        m.token = doc["token"].get<std::string>();
    }

    switch (m.type) {
    case ControlType::Step:
        if (!doc.contains("n") || !is_count(doc["n"]) || doc["n"].get<std::uint64_t>() == 0)
            return bad("n: required positive integer");
        m.n = doc["n"].get<std::uint64_t>();
        break;
    case ControlType::Intervene:
        if (!doc.contains("intervention")) return bad("intervention: required");
        try {
            m.intervention = intervention_from_json(doc["intervention"]);
        } catch (const Error& e) {
            return bad(std::string("intervention.") + e.what());
        }
        break;
    case ControlType::Subscribe:
        if (!doc.contains("channel") || !doc["channel"].is_string()) return bad("channel: required string");
        try {
            m.channel = channel_from(doc["channel"].get<std::string>());
        } catch (const Error& e) {
            return ParseError{codes::kUnknownChannel, e.what()};
        }
        if (doc.contains("decimation")) {
            if (!is_count(doc["decimation"]) || doc["decimation"].get<std::uint64_t>() == 0)
                return bad("decimation: must be a positive integer");
            m.decimation = doc["decimation"].get<std::uint32_t>();
        }
        if (doc.contains("cursor")) {
            if (!is_count(doc["cursor"])) return bad("cursor: must be a non-negative integer");
            m.cursor = doc["cursor"].get<std::uint64_t>();
        }
        break;
    case ControlType::Unsubscribe:
        if (!doc.contains("subscription") || !is_count(doc["subscription"]))
            return bad("subscription: required integer");
        m.subscription = doc["subscription"].get<std::uint64_t>();
        break;
    case ControlType::Restore:
        if (doc.contains("ref") && doc["ref"].is_string()) m.ref = doc["ref"].get<std::string>();
        else if (doc.contains("snapshot") && doc["snapshot"].is_object()) m.snapshot = doc["snapshot"];
        else return bad("restore needs ref (string) or snapshot (object)");
        break;
    default: break;
    }
    return m;
}

nlohmann::json control_to_json(const ControlMessage& m) {
    nlohmann::json j{{"schema", kSchemaVersion}, {"type", to_string(m.type)}, {"request_id", m.request_id}};
    if (!m.token.empty()) j["token"] = m.token;
    switch (m.type) {
    case ControlType::Step: j["n"] = m.n; break;
    case ControlType::Intervene:
        if (m.intervention) j["intervention"] = intervention_to_json(*m.intervention);
        break;
    case ControlType::Subscribe:
        j["channel"] = to_string(m.channel);
        j["decimation"] = m.decimation;
        if (m.cursor) j["cursor"] = *m.cursor;
        break;
    case ControlType::Unsubscribe: j["subscription"] = m.subscription; break;
    case ControlType::Restore:
        if (m.snapshot) j["snapshot"] = *m.snapshot;
        else j["ref"] = m.ref;
        break;
    default: break;
    }
    return j;
}

nlohmann::json TelemetryFrame::to_json() const {
    nlohmann::json j{{"channel", to_string(channel)}, {"seq", seq}, {"epoch", epoch}, {"t", t}, {"payload", payload}};
    if (gap) j["gap"] = true;
    return j;
}

TelemetryFrame TelemetryFrame::from_json(const nlohmann::json& j) {
    try {
        TelemetryFrame f;
        f.channel = channel_from(j.at("channel").get<std::string>());
        f.seq = j.at("seq").get<std::uint64_t>();
        f.epoch = j.at("epoch").get<std::uint64_t>();
        f.t = j.at("t").get<double>();
        f.gap = j.value("gap", false);
        f.payload = j.at("payload");
        return f;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Validation, std::string("frame: ") + e.what());
    }
}

std::string encode_frame(const nlohmann::json& message) {
    const std::string body = message.dump();
    return std::to_string(body.size()) + "\n" + body;
}

std::vector<nlohmann::json> decode_frames(const std::string& buffer) {
    std::vector<nlohmann::json> out;
    std::size_t pos = 0;
    while (pos < buffer.size()) {
        const auto nl = buffer.find('\n', pos);
        if (nl == std::string::npos) fail(ErrorKind::Validation, "frame stream: truncated length prefix");
        std::size_t len = 0;
        try {
            len = std::stoull(buffer.substr(pos, nl - pos));
        } catch (const std::exception&) {
            fail(ErrorKind::Validation, "frame stream: bad length prefix");
        }
        if (nl + 1 + len > buffer.size()) fail(ErrorKind::Validation, "frame stream: truncated body");
        out.push_back(nlohmann::json::parse(buffer.substr(nl + 1, len)));
        pos = nl + 1 + len;
    }
    return out;
}

// ---- session ---------------------------------------------------------------

Session::Session(std::string id, Engine engine, SessionOptions opts)
    : id_(std::move(id)), token_(random_token()), opts_(opts), engine_(std::make_unique<Engine>(std::move(engine))) {
    if (opts_.vm_every == 0 || opts_.energy_every == 0) fail(ErrorKind::Config, "session: sample intervals must be >= 1");
    for (const auto& [name, ch] : kChannels) {
        auto& log = logs_[ch];
        log.lossy = lossy(ch);
        log.capacity = log.lossy ? opts_.lossy_capacity : 0;
    }
    raster_seen_ = engine_->raster().size();
    publish_status("created");
    thread_ = std::thread([this] { loop(); });
}

Session::~Session() { close(); }

void Session::close() {
    {
        std::lock_guard lk(inbox_mu_);
        if (stop_) return;
        stop_ = true;
    }
    inbox_cv_.notify_all();
    if (thread_.joinable()) thread_.join();
    hub_cv_.notify_all();
}

Reply Session::handle(const ControlMessage& msg) {
    auto cmd = std::make_unique<Command>();
    cmd->msg = msg;
    auto fut = cmd->done.get_future();
    {
        std::lock_guard lk(inbox_mu_);
        if (stop_) return error_reply(msg.request_id, codes::kClosed, "session is closed");
        inbox_.push_back(std::move(cmd));
    }
    inbox_cv_.notify_all();
    return fut.get();
}

Reply Session::handle_json(const nlohmann::json& doc) {
    auto parsed = parse_control(doc);
    if (auto* err = std::get_if<ParseError>(&parsed)) {
        const std::string id = doc.is_object() && doc.contains("request_id") && doc["request_id"].is_string()
                                   ? doc["request_id"].get<std::string>()
                                   : std::string{};
        return error_reply(id, err->code, err->message);
    }
    return handle(std::get<ControlMessage>(parsed));
}

void Session::loop() {
    for (;;) {
        std::deque<std::unique_ptr<Command>> batch;
        {
            std::unique_lock lk(inbox_mu_);
            // Idle sessions sleep until a command arrives; running ones only drain.
            inbox_cv_.wait(lk, [&] { return stop_ || !inbox_.empty() || running_ || steps_left_ > 0 || !deferred_steps_.empty(); });
            if (stop_) break;
            batch.swap(inbox_);
        }
        for (auto& cmd : batch) execute(*cmd);

        if (steps_left_ == 0 && !deferred_steps_.empty()) {
            pending_step_ = std::move(deferred_steps_.front());
            deferred_steps_.pop_front();
            steps_left_ = pending_step_->msg.n;
            running_ = false;
            publish_status("stepping");
        }
        if (running_ || steps_left_ > 0) {
            engine_->step();
            publish_step();
            if (steps_left_ > 0 && --steps_left_ == 0) {
                publish_status("paused");
                pending_step_->done.set_value(ok_reply(pending_step_->msg.request_id, status_payload()));
                pending_step_.reset();
            }
        }
    }
    // Anything still waiting gets a closed reply.
    const auto close_cmd = [](Command& c) {
        c.done.set_value(error_reply(c.msg.request_id, codes::kClosed, "session closed"));
    };
    if (pending_step_) close_cmd(*pending_step_);
    for (auto& c : deferred_steps_) close_cmd(*c);
    std::lock_guard lk(inbox_mu_);
    for (auto& c : inbox_) close_cmd(*c);
    inbox_.clear();
}

void Session::execute(Command& cmd) {
    const auto& m = cmd.msg;
    const auto reply = [&](Reply r) { cmd.done.set_value(std::move(r)); };
    if (!request_ids_.insert(m.request_id).second)
        return reply(error_reply(m.request_id, codes::kDuplicateId, "request id '" + m.request_id + "' was already used"));
    if (mutating(m.type) && m.token != token_)
        return reply(error_reply(m.request_id, codes::kForbidden, "command needs the session's controller token"));

    switch (m.type) {
    case ControlType::Pause:
        running_ = false;
        if (pending_step_) {
            // A pause cuts a step(n) short; its caller learns how far it got.
            auto data = status_payload();
            data["interrupted"] = true;
            data["steps_remaining"] = steps_left_;
            pending_step_->done.set_value(ok_reply(pending_step_->msg.request_id, data));
            pending_step_.reset();
            steps_left_ = 0;
        }
        publish_status("paused");
        return reply(ok_reply(m.request_id, status_payload()));
    case ControlType::Resume:
        running_ = true;
        publish_status("running");
        return reply(ok_reply(m.request_id, status_payload()));
    case ControlType::Step: {
        auto owned = std::make_unique<Command>(std::move(cmd));
        deferred_steps_.push_back(std::move(owned));
        return;
    }
    case ControlType::Intervene: {
        const Ack ack = engine_->submit(*m.intervention);
        if (!ack.accepted) return reply(error_reply(m.request_id, codes::kRejected, ack.message));
        return reply(ok_reply(m.request_id, {{"intervention_id", ack.id}, {"t", engine_->now()}}));
    }
    case ControlType::Subscribe: {
        std::uint64_t id = 0, cursor = 0;
        {
            std::lock_guard lk(hub_mu_);
            const auto& log = logs_.at(m.channel);
            cursor = m.cursor.value_or(log.next_seq - 1);
            id = next_sub_++;
            subs_[id] = {m.channel, m.decimation, std::min(cursor, log.next_seq - 1), 0};
        }
        if (m.channel == Channel::Weights) {
            nlohmann::json w = nlohmann::json::object();
            for (const auto& p : engine_->network().projections) {
                std::vector<double> vals(p.synapses.size(), 0.0);
                for (std::size_t k = 0; k < vals.size(); ++k)
                    if (p.active(k)) vals[k] = weight_of(p.synapses[k], p.device);
                w[p.id] = {{"n_pre", p.n_pre}, {"n_post", p.n_post}, {"w", vals}};
            }
            publish(Channel::Weights, engine_->now(), w);
        }
        return reply(ok_reply(m.request_id, {{"subscription", id}, {"channel", to_string(m.channel)}, {"cursor", cursor}}));
    }
    case ControlType::Unsubscribe: {
        std::lock_guard lk(hub_mu_);
        if (subs_.erase(m.subscription) == 0)
            return reply(error_reply(m.request_id, codes::kUnknownSubscription,
                                     "no subscription " + std::to_string(m.subscription)));
        return reply(ok_reply(m.request_id));
    }
    case ControlType::Snapshot: {
        const std::string ref = "snap-" + std::to_string(next_snapshot_++);
        auto doc = engine_->snapshot();
        snapshots_[ref] = doc;
        return reply(ok_reply(m.request_id, {{"ref", ref}, {"snapshot", std::move(doc)}}));
    }
    case ControlType::Restore: {
        nlohmann::json doc;
        if (m.snapshot) {
            doc = *m.snapshot;
        } else {
            const auto it = snapshots_.find(m.ref);
            if (it == snapshots_.end()) return reply(error_reply(m.request_id, codes::kBadSnapshot, "unknown snapshot ref '" + m.ref + "'"));
            doc = it->second;
        }
        try {
            auto restored = std::make_unique<Engine>(Engine::restore(doc));
            engine_ = std::move(restored);
        } catch (const Error& e) {
            return reply(error_reply(m.request_id, codes::kBadSnapshot, e.what()));
        }
        running_ = false;
        raster_seen_ = engine_->raster().size();
        {
            std::lock_guard lk(hub_mu_);
            ++epoch_;
        }
        publish_status("restored");
        return reply(ok_reply(m.request_id, status_payload()));
    }
    case ControlType::Status: return reply(ok_reply(m.request_id, status_payload()));
    }
}

nlohmann::json Session::status_payload() const {
    std::string state = running_ ? "running" : (steps_left_ > 0 ? "stepping" : "paused");
    return {{"state", state},
            {"step", engine_->step_index()},
            {"t", engine_->now()},
            {"dt", engine_->dt()},
            {"spikes", engine_->raster().size()},
            {"raster_hash", engine_->raster_hash()},
            {"pending_interventions", engine_->pending_interventions()},
            {"energy_fj", engine_->ledger().total_fj()}};
}

bool Session::subscribed(Channel c) const {
    std::lock_guard lk(hub_mu_);
    return std::any_of(subs_.begin(), subs_.end(), [&](const auto& s) { return s.second.channel == c; });
}

void Session::publish(Channel c, double t, nlohmann::json payload) {
    {
        std::lock_guard lk(hub_mu_);
        auto& log = logs_.at(c);
        TelemetryFrame f{c, log.next_seq++, epoch_, t, false, std::move(payload)};
        log.frames.push_back(std::move(f));
        if (log.capacity > 0 && log.frames.size() > log.capacity) log.frames.pop_front();
    }
    hub_cv_.notify_all();
}

void Session::publish_status(const std::string& event) {
    auto p = status_payload();
    p["event"] = event;
    publish(Channel::Status, engine_->now(), std::move(p));
}

void Session::publish_step() {
    const auto& raster = engine_->raster();
    const double dt = engine_->dt();
    const auto& net = engine_->network();
    if (raster.size() > raster_seen_) {
        auto spikes = nlohmann::json::array();
        for (std::size_t i = raster_seen_; i < raster.size(); ++i)
            spikes.push_back({{"pop", net.populations[raster[i].pop].id}, {"idx", raster[i].index}});
        publish(Channel::Raster, static_cast<double>(raster.back().step) * dt, {{"spikes", std::move(spikes)}});
        raster_seen_ = raster.size();
    }
    const std::uint64_t k = engine_->step_index();
    if (k % opts_.vm_every == 0 && subscribed(Channel::Vm)) {
        std::vector<double> v(net.neuron_count);
        for (std::uint32_t g = 0; g < net.neuron_count; ++g) v[g] = engine_->soma(g).v_m;
        publish(Channel::Vm, engine_->now(), {{"v", std::move(v)}});
    }
    if (k % opts_.energy_every == 0 && subscribed(Channel::Energy)) {
        nlohmann::json cats = nlohmann::json::object();
        for (auto c : kEnergyCategories) cats[std::string(epicsim::to_string(c))] = engine_->ledger().tally_fj(c);
        publish(Channel::Energy, engine_->now(), {{"total_fj", engine_->ledger().total_fj()}, {"categories", cats}});
    }
}

bool Session::has_subscription(std::uint64_t subscription) const {
    std::lock_guard lk(hub_mu_);
    return subs_.count(subscription) > 0;
}

std::vector<TelemetryFrame> Session::poll(std::uint64_t subscription, std::size_t max, std::chrono::milliseconds wait) {
    std::unique_lock lk(hub_mu_);
    auto ready = [&] {
        const auto it = subs_.find(subscription);
        return it == subs_.end() || logs_.at(it->second.channel).next_seq - 1 > it->second.cursor;
    };
    if (wait.count() > 0) hub_cv_.wait_for(lk, wait, ready);

    const auto it = subs_.find(subscription);
    if (it == subs_.end()) fail(ErrorKind::Validation, "unknown subscription " + std::to_string(subscription));
    auto& sub = it->second;
    const auto& log = logs_.at(sub.channel);
    std::vector<TelemetryFrame> out;
    if (log.frames.empty() || max == 0) return out;

    const std::uint64_t latest = log.next_seq - 1;
    if (log.lossy) {
        // Thin a lagging reader: skip what fell out of the ring or beyond its lag bound.
        std::uint64_t floor = log.frames.front().seq - 1;
        if (latest > opts_.subscriber_lag) floor = std::max(floor, latest - opts_.subscriber_lag);
        if (sub.cursor < floor) {
            for (std::uint64_t s = sub.cursor + 1; s <= floor; ++s) sub.dropped += s % sub.decimation == 0;
            sub.cursor = floor;
        }
    }
    const std::uint64_t first = log.frames.front().seq;
    for (std::uint64_t s = std::max(sub.cursor + 1, first); s <= latest && out.size() < max; ++s) {
        const auto& f = log.frames[s - first];
        sub.cursor = s;
        if (log.lossy && s % sub.decimation != 0) continue;
        if (sub.dropped > 0) {
            TelemetryFrame gap{sub.channel, 0, f.epoch, f.t, true, {{"dropped", sub.dropped}, {"resume_seq", s}}};
            out.push_back(std::move(gap));
            sub.dropped = 0;
            if (out.size() >= max) {
                sub.cursor = s - 1; // deliver this frame on the next poll
                break;
            }
        }
        out.push_back(f);
    }
    return out;
}

// ---- registry --------------------------------------------------------------

std::shared_ptr<Session> Registry::create(const nlohmann::json& request, SessionOptions opts) {
    if (!request.is_object() || !request.contains("spec")) fail(ErrorKind::Validation, "spec: required");
    const NetworkSpec spec = parse_spec(request.at("spec"));
    std::uint64_t seed = spec.engine.seed;
    if (request.contains("seed")) {
        if (!is_count(request["seed"])) fail(ErrorKind::Validation, "seed: must be a non-negative integer");
        seed = request["seed"].get<std::uint64_t>();
    }
    Engine engine(build_network(spec, seed), seed);
    if (request.contains("stimulus")) engine.set_stimulus(parse_stimulus(request.at("stimulus")));
    std::lock_guard lk(mu_);
    const std::string id = "s" + std::to_string(next_++);
    auto s = std::make_shared<Session>(id, std::move(engine), opts);
    sessions_[id] = s;
    return s;
}

std::shared_ptr<Session> Registry::find(const std::string& id) const {
    std::lock_guard lk(mu_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

bool Registry::remove(const std::string& id) {
    std::shared_ptr<Session> s;
    {
        std::lock_guard lk(mu_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) return false;
        s = it->second;
        sessions_.erase(it);
    }
    s->close();
    return true;
}

std::size_t Registry::size() const {
    std::lock_guard lk(mu_);
    return sessions_.size();
}

} // namespace epicsim::gateway
