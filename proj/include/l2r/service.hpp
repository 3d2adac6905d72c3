#pragma once

#include "l2r/workspace.hpp"

#include <memory>
#include <string>

namespace l2r {

/// JSON-over-HTTP front end for a Workspace (see README for the endpoint
/// table). Requests are served concurrently; knowledge-base writes are
/// serialized and rejected with 409 while an AKE job holds the write lease.
class Service {
public:
    explicit Service(Workspace& workspace);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Blocks until stop(). Returns false if the address could not be bound.
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port and returns it; serve with listen_after_bind().
    int bind_to_any_port(const std::string& host);
    bool listen_after_bind();
    void wait_until_ready() const;
    void stop();

    /// Joins a running AKE job, if any.
    void wait_for_jobs();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace l2r
