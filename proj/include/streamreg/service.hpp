#ifndef STREAMREG_SERVICE_HPP
#define STREAMREG_SERVICE_HPP

#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "streamreg/engine.hpp"

namespace streamreg {

/// Multi-stream ingestion and query service.
///
/// Requests and responses are JSON objects; see docs/protocol.md. Every
/// response carries "ok"; failures carry {"error": {"code", "message"}} with
/// code one of bad_request, not_found, validation, warm_up, numerical, internal.
///
/// Different streams are handled concurrently. Within a stream, ingests are
/// serialized under the stream's lock and queries work on a copied snapshot.
class Service {
public:
    /// `defaults` configures streams that are created implicitly by ingest.
    explicit Service(EngineConfig defaults = {});

    nlohmann::json handle(const nlohmann::json& request);
    /// Parses one request line; a parse failure becomes a bad_request response.
    std::string handle_line(const std::string& line);

    std::size_t stream_count() const;

private:
    struct Stream {
        std::mutex mu;
        Regressor reg;
        explicit Stream(Regressor r) : reg(std::move(r)) {}
    };

    std::shared_ptr<Stream> find(const std::string& id) const;
    std::shared_ptr<Stream> find_or_create(const std::string& id);
    Regressor snapshot(const std::string& id) const;

    nlohmann::json op_create(const nlohmann::json& req);
    nlohmann::json op_ingest(const nlohmann::json& req);
    nlohmann::json op_query(const nlohmann::json& req);
    nlohmann::json op_checkpoint(const nlohmann::json& req);
    nlohmann::json op_restore(const nlohmann::json& req);
    nlohmann::json op_drop(const nlohmann::json& req);
    nlohmann::json op_list() const;

    EngineConfig defaults_;
    mutable std::mutex map_mu_;
    std::map<std::string, std::shared_ptr<Stream>> streams_;
};

/// Reads one request per line until EOF, writing one response line each.
void serve_stdio(Service& service, std::istream& in, std::ostream& out);

/// Blocking HTTP endpoint: POST /rpc with one JSON request per body, GET /health.
/// Returns false if the socket could not be bound.
bool serve_http(Service& service, const std::string& host, int port);

}  // namespace streamreg

#endif
