// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <string>

namespace intentkit::detail
{

struct HttpOptions
{
    int timeout_ms = 10000;
    int retries = 2;
    int backoff_ms = 100;
};

/// POST a JSON body to a full http:// URL and parse the JSON reply.
/// Retries with exponential backoff; throws RemoteUnavailable / Timeout after the last attempt.
[[nodiscard]] nlohmann::json post_json(std::string const& url, nlohmann::json const& body, HttpOptions const& options);

} // namespace intentkit::detail
