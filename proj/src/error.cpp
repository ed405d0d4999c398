#include "dptnet/error.hpp"

namespace dptnet {

namespace {

std::string join(const std::vector<ConfigDiagnostic>& diags)
{
    std::string out;
    for (const auto& d : diags) {
        if (!out.empty())
            out += '\n';
        if (d.line > 0)
            out += "line " + std::to_string(d.line) + ": ";
        out += d.message;
    }
    return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigDiagnostic> diags)
    : Error(join(diags)), diags_(std::move(diags))
{
}

}  // namespace dptnet
