#pragma once

namespace uvreenact {

/// Entry point of the `uvreenact` tool. Returns 0 on success, 2 on a usage error, 1 on a runtime failure.
int cli_main(int argc, const char* const* argv);

} // namespace uvreenact
