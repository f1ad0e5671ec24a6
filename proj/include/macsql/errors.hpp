#pragma once

#include <stdexcept>
#include <string>

namespace macsql {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MACSQL_DEFINE_ERROR(Name)          \
    class Name : public Error {            \
    public:                                \
        using Error::Error;                \
    }

// schema_catalog
MACSQL_DEFINE_ERROR(UnreadableDatabase);
MACSQL_DEFINE_ERROR(UnknownColumn);

// llm_backend
MACSQL_DEFINE_ERROR(InvalidRequest);
MACSQL_DEFINE_ERROR(ScriptMiss);

class BackendUnavailable : public Error {
public:
    BackendUnavailable(const std::string& message, int attempts)
        : Error(message), attempts_(attempts) {}
    int attempts() const { return attempts_; }

private:
    int attempts_;
};

// selector / decomposer
MACSQL_DEFINE_ERROR(NoJsonFound);
MACSQL_DEFINE_ERROR(AllTablesDropped);
MACSQL_DEFINE_ERROR(NoSqlFound);

// datasets / orchestrator
MACSQL_DEFINE_ERROR(MissingDatabase);
MACSQL_DEFINE_ERROR(MalformedItem);
MACSQL_DEFINE_ERROR(MissingGold);

// evaluation
MACSQL_DEFINE_ERROR(UnsupportedSyntax);

// configuration / command line
MACSQL_DEFINE_ERROR(ConfigError);

#undef MACSQL_DEFINE_ERROR

}  // namespace macsql
