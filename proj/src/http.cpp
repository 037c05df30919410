// SPDX-License-Identifier: Apache-2.0
#include "http.hpp"

#include <intentkit/error.hpp>

#include <httplib.h>

#include <chrono>
#include <thread>

namespace intentkit::detail
{

namespace
{
    struct SplitUrl
    {
        std::string base; // scheme://host[:port]
        std::string path;
    };

    SplitUrl split_url(std::string const& url)
    {
        auto const scheme = url.find("://");
        if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0)
            throw ConfigError("only http:// endpoints are supported: '" + url + "'");
        auto const pathStart = url.find('/', scheme + 3);
        if (pathStart == std::string::npos)
            return { url, "/" };
        return { url.substr(0, pathStart), url.substr(pathStart) };
    }
} // namespace

nlohmann::json post_json(std::string const& url, nlohmann::json const& body, HttpOptions const& options)
{
    auto const [base, path] = split_url(url);
    auto const payload = body.dump();
    auto const timeout = std::chrono::milliseconds(options.timeout_ms);

    int lastStatus = 0;
    std::string lastError;
    bool timedOut = false;
    for (int attempt = 0; attempt <= options.retries; ++attempt)
    {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(options.backoff_ms << (attempt - 1)));

        httplib::Client client(base);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        auto const started = std::chrono::steady_clock::now();
        auto res = client.Post(path, payload, "application/json");
        if (!res)
        {
            auto const err = res.error();
            timedOut = err == httplib::Error::ConnectionTimeout
                       || (err == httplib::Error::Read && std::chrono::steady_clock::now() - started >= timeout);
            lastStatus = 0;
            lastError = httplib::to_string(err);
            continue;
        }
        timedOut = false;
        if (res->status < 200 || res->status >= 300)
        {
            lastStatus = res->status;
            lastError = res->body.substr(0, 200);
            // client errors are not transient
            if (res->status >= 400 && res->status < 500)
                break;
            continue;
        }
        try
        {
            return nlohmann::json::parse(res->body);
        }
        catch (nlohmann::json::exception const& e)
        {
            throw BackendError("malformed JSON from " + url + ": " + e.what());
        }
    }
    if (timedOut)
        throw Timeout(options.timeout_ms);
    throw RemoteUnavailable(lastStatus, url + ": " + lastError);
}

} // namespace intentkit::detail
