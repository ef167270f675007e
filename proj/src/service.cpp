#include "streamreg/service.hpp"

#include <istream>
#include <ostream>

#include <httplib.h>

#include "streamreg/errors.hpp"

namespace streamreg {

namespace {

struct RequestError : Error {
    std::string code;
    RequestError(std::string c, const std::string& what) : Error(what), code(std::move(c)) {}
};

nlohmann::json failure(const std::string& code, const std::string& message) {
    return {{"ok", false}, {"error", {{"code", code}, {"message", message}}}};
}

std::string stream_id(const nlohmann::json& req) {
    if (!req.contains("stream_id") || !req["stream_id"].is_string()) {
        throw RequestError("bad_request", "missing string field 'stream_id'");
    }
    std::string id = req["stream_id"].get<std::string>();
    if (id.empty()) throw RequestError("bad_request", "stream_id must be non-empty");
    return id;
}

double number_field(const nlohmann::json& req, const char* key) {
    if (!req.contains(key) || !req[key].is_number()) {
        throw RequestError("bad_request", std::string("missing numeric field '") + key + "'");
    }
    return req[key].get<double>();
}

StreamBatch parse_points(const nlohmann::json& req) {
    StreamBatch b;
    if (req.contains("points")) {
        const auto& pts = req["points"];
        if (!pts.is_array()) throw RequestError("bad_request", "'points' must be an array of [t, y] pairs");
        for (const auto& p : pts) {
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
                throw RequestError("bad_request", "each point must be a [t, y] pair of numbers");
            }
            b.t.push_back(p[0].get<double>());
            b.y.push_back(p[1].get<double>());
        }
    } else if (req.contains("t") && req.contains("y")) {
        if (!req["t"].is_array() || !req["y"].is_array()) {
            throw RequestError("bad_request", "'t' and 'y' must be arrays");
        }
        try {
            b.t = req["t"].get<std::vector<double>>();
            b.y = req["y"].get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw RequestError("bad_request", "'t' and 'y' must hold numbers");
        }
        if (b.t.size() != b.y.size()) throw RequestError("bad_request", "'t' and 'y' lengths differ");
    } else {
        throw RequestError("bad_request", "ingest needs 'points' or 't' and 'y'");
    }
    if (b.t.empty()) throw RequestError("bad_request", "ingest batch is empty");
    return b;
}

}  // namespace

Service::Service(EngineConfig defaults) : defaults_(std::move(defaults)) { defaults_.validate(); }

std::size_t Service::stream_count() const {
    std::lock_guard lock(map_mu_);
    return streams_.size();
}

std::shared_ptr<Service::Stream> Service::find(const std::string& id) const {
    std::lock_guard lock(map_mu_);
    auto it = streams_.find(id);
    if (it == streams_.end()) throw RequestError("not_found", "unknown stream '" + id + "'");
    return it->second;
}

std::shared_ptr<Service::Stream> Service::find_or_create(const std::string& id) {
    std::lock_guard lock(map_mu_);
    auto& slot = streams_[id];
    if (!slot) slot = std::make_shared<Stream>(Regressor(defaults_));
    return slot;
}

Regressor Service::snapshot(const std::string& id) const {
    auto s = find(id);
    std::lock_guard lock(s->mu);
    return s->reg;
}

nlohmann::json Service::handle(const nlohmann::json& req) {
    try {
        if (!req.is_object()) throw RequestError("bad_request", "request must be a JSON object");
        if (!req.contains("op") || !req["op"].is_string()) throw RequestError("bad_request", "missing string field 'op'");
        const std::string op = req["op"].get<std::string>();
        if (op == "create") return op_create(req);
        if (op == "ingest") return op_ingest(req);
        if (op == "query") return op_query(req);
        if (op == "checkpoint") return op_checkpoint(req);
        if (op == "restore") return op_restore(req);
        if (op == "drop") return op_drop(req);
        if (op == "list") return op_list();
        throw RequestError("bad_request", "unknown op '" + op + "'");
    } catch (const RequestError& e) {
        return failure(e.code, e.what());
    } catch (const FormatError& e) {
        return failure("bad_request", e.what());
    } catch (const DomainError& e) {
        return failure("validation", e.what());
    } catch (const StateError& e) {
        return failure("warm_up", e.what());
    } catch (const NumericalError& e) {
        return failure("numerical", e.what());
    } catch (const IllConditionedError& e) {
        return failure("numerical", e.what());
    } catch (const DegenerateDensityError& e) {
        return failure("numerical", e.what());
    } catch (const nlohmann::json::exception& e) {
        return failure("bad_request", e.what());
    } catch (const std::exception& e) {
        return failure("internal", e.what());
    }
}

std::string Service::handle_line(const std::string& line) {
    nlohmann::json req;
    try {
        req = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        return failure("bad_request", std::string("invalid JSON: ") + e.what()).dump();
    }
    return handle(req).dump();
}

nlohmann::json Service::op_create(const nlohmann::json& req) {
    const std::string id = stream_id(req);
    EngineConfig cfg = defaults_;
    if (req.contains("config")) {
        try {
            cfg = engine_config_from_json(req["config"]);
        } catch (const nlohmann::json::exception& e) {
            throw RequestError("bad_request", std::string("bad config: ") + e.what());
        }
    }
    if (req.contains("mem_cap")) {
        if (req["mem_cap"].is_null()) cfg.schedule.mem_cap.reset();
        else cfg.schedule.mem_cap = req["mem_cap"].get<std::int64_t>();
        cfg.validate();
    }
    std::lock_guard lock(map_mu_);
    if (streams_.count(id)) throw RequestError("validation", "stream '" + id + "' already exists");
    streams_[id] = std::make_shared<Stream>(Regressor(cfg));
    return {{"ok", true}, {"stream_id", id}};
}

nlohmann::json Service::op_ingest(const nlohmann::json& req) {
    const std::string id = stream_id(req);
    const StreamBatch batch = parse_points(req);
    auto s = find_or_create(id);
    std::lock_guard lock(s->mu);
    s->reg.ingest(batch);
    return {{"ok", true}, {"stream_id", id}, {"n", s->reg.n()}};
}

nlohmann::json Service::op_query(const nlohmann::json& req) {
    const std::string id = stream_id(req);
    if (!req.contains("kind") || !req["kind"].is_string()) throw RequestError("bad_request", "missing string field 'kind'");
    const std::string kind = req["kind"].get<std::string>();
    if (kind != "estimate" && kind != "density" && kind != "stats") {
        throw RequestError("bad_request", "kind must be estimate, density or stats");
    }
    if (kind == "stats") {
        if (req.contains("t")) throw RequestError("bad_request", "stats takes no 't'");
        const Regressor reg = snapshot(id);
        return {{"ok", true},
                {"stream_id", id},
                {"n", reg.n()},
                {"q_active", reg.n() > 0 ? reg.active_count() : 0},
                {"memory_units", reg.memory_footprint()},
                {"rho", reg.current_rho()}};
    }
    const double t = number_field(req, "t");
    const Regressor reg = snapshot(id);
    if (!reg.config().basis.domain.contains(t)) throw DomainError("t outside the stream's domain");
    if (reg.n() < 1) throw StateError("no observations ingested yet (warm-up)");
    if (kind == "estimate") {
        const double rho = req.contains("rho") ? number_field(req, "rho") : reg.current_rho();
        return {{"ok", true}, {"stream_id", id}, {"t", t}, {"value", reg.estimate(rho, t)}, {"rho", rho}};
    }
    double value = 0.0;
    if (reg.density()) {
        value = reg.density()->eval_normalized(t);
    } else {
        value = 1.0 / reg.config().basis.domain.length();
    }
    return {{"ok", true}, {"stream_id", id}, {"t", t}, {"value", value}};
}

nlohmann::json Service::op_checkpoint(const nlohmann::json& req) {
    const std::string id = stream_id(req);
    const Regressor reg = snapshot(id);
    return {{"ok", true}, {"stream_id", id}, {"checkpoint", reg.to_checkpoint()}};
}

nlohmann::json Service::op_restore(const nlohmann::json& req) {
    const std::string id = stream_id(req);
    if (!req.contains("checkpoint")) throw RequestError("bad_request", "missing field 'checkpoint'");
    Regressor reg = Regressor::from_checkpoint(req["checkpoint"]);
    const std::int64_t n = reg.n();
    std::lock_guard lock(map_mu_);
    streams_[id] = std::make_shared<Stream>(std::move(reg));
    return {{"ok", true}, {"stream_id", id}, {"n", n}};
}

nlohmann::json Service::op_drop(const nlohmann::json& req) {
    const std::string id = stream_id(req);
    std::lock_guard lock(map_mu_);
    if (streams_.erase(id) == 0) throw RequestError("not_found", "unknown stream '" + id + "'");
    return {{"ok", true}, {"stream_id", id}};
}

nlohmann::json Service::op_list() const {
    std::lock_guard lock(map_mu_);
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& [id, s] : streams_) ids.push_back(id);
    return {{"ok", true}, {"streams", ids}};
}

void serve_stdio(Service& service, std::istream& in, std::ostream& out) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out << service.handle_line(line) << '\n' << std::flush;
    }
}

bool serve_http(Service& service, const std::string& host, int port) {
    httplib::Server server;
    server.Post("/rpc", [&service](const httplib::Request& req, httplib::Response& res) {
        res.set_content(service.handle_line(req.body), "application/json");
    });
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"ok":true})", "application/json");
    });
    return server.listen(host, port);
}

}  // namespace streamreg
