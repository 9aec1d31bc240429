#ifndef EVTACH_PARALLEL_HPP
#define EVTACH_PARALLEL_HPP

namespace evtach {

/// Number of OpenMP threads the kernels may use: the runtime default,
/// capped by the EVTACH_THREADS environment variable when set.
/// All kernels are written so that results are bit-identical for any value.
int effective_threads();

} // namespace evtach

#endif // EVTACH_PARALLEL_HPP
