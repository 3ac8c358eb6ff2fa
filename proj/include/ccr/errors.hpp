#pragma once

#include <stdexcept>
#include <string>

namespace ccr {

// Every failure raised by the library derives from Error. The kind tag lets
// the CLI map failures onto exit codes without string matching.
enum class ErrorKind {
    Structural,       // malformed graph or file
    Precondition,     // operation called on an input that violates its contract
    Domain,           // argument outside the operation's domain
    Resource,         // enumeration bound exceeded
    UndefinedEstimand,
    Numerical,
    Config,
    Coverage,
    Transport,
    DataQuality,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define CCR_DEFINE_ERROR(Name, Kind)                                    \
    class Name : public Error {                                         \
    public:                                                             \
        explicit Name(const std::string& what) : Error(Kind, what) {}   \
    };

CCR_DEFINE_ERROR(StructuralError, ErrorKind::Structural)
CCR_DEFINE_ERROR(PreconditionError, ErrorKind::Precondition)
CCR_DEFINE_ERROR(DomainError, ErrorKind::Domain)
CCR_DEFINE_ERROR(ResourceError, ErrorKind::Resource)
CCR_DEFINE_ERROR(UndefinedEstimandError, ErrorKind::UndefinedEstimand)
CCR_DEFINE_ERROR(NumericalError, ErrorKind::Numerical)
CCR_DEFINE_ERROR(ConfigError, ErrorKind::Config)
CCR_DEFINE_ERROR(CoverageError, ErrorKind::Coverage)
CCR_DEFINE_ERROR(DataQualityError, ErrorKind::DataQuality)

#undef CCR_DEFINE_ERROR

// Carries the query id so an interrupted batch can be resumed.
class TransportError : public Error {
public:
    TransportError(std::string query_id, const std::string& what)
        : Error(ErrorKind::Transport, what), query_id_(std::move(query_id)) {}

    const std::string& query_id() const noexcept { return query_id_; }

private:
    std::string query_id_;
};

const char* to_string(ErrorKind kind) noexcept;

} // namespace ccr
