#pragma once

namespace lp {

/// Applies the LATENT_PROBE_THREADS cap (0 or unset means automatic) and
/// returns the effective worker count.
int configure_threads();

}  // namespace lp
