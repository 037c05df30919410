// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace intentkit
{

/// Broad failure category. Maps onto CLI exit codes.
enum class ErrorKind
{
    Config,
    Data,
    Backend,
    Logic,
};

class Error: public std::runtime_error
{
  public:
    Error(ErrorKind kind, std::string const& what): std::runtime_error(what), _kind(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return _kind; }

  private:
    ErrorKind _kind;
};

struct ConfigError: Error
{
    explicit ConfigError(std::string const& what): Error(ErrorKind::Config, what) {}
};

struct DataError: Error
{
    explicit DataError(std::string const& what): Error(ErrorKind::Data, what) {}
};

/// Any failure talking to a model or embedding endpoint.
struct BackendError: Error
{
    explicit BackendError(std::string const& what): Error(ErrorKind::Backend, what) {}
};

/// HTTP endpoint unreachable or returned a non-2xx status. status == 0 means no response.
struct RemoteUnavailable: BackendError
{
    RemoteUnavailable(int status, std::string const& what):
        BackendError("remote unavailable (status " + std::to_string(status) + "): " + what), status(status)
    {
    }
    int status;
};

struct Timeout: BackendError
{
    explicit Timeout(int ms): BackendError("request timed out after " + std::to_string(ms) + " ms"), ms(ms) {}
    int ms;
};

struct ScriptExhausted: BackendError
{
    ScriptExhausted(): BackendError("scripted backend exhausted") {}
};

struct InvalidArgument: Error
{
    explicit InvalidArgument(std::string const& what): Error(ErrorKind::Logic, what) {}
};

} // namespace intentkit
