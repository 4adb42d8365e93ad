#ifndef MOC3D_ERROR_HPP
#define MOC3D_ERROR_HPP

#include <stdexcept>
#include <string>

namespace moc3d {

// Base of every error raised by the library. `module()` names the component
// that raised it so the CLI can attribute failures.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

#define MOC3D_DEFINE_ERROR(Name, Module)                              \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(Module, what) {}   \
  }

MOC3D_DEFINE_ERROR(GeometryError, "geometry");
MOC3D_DEFINE_ERROR(ReferenceError, "geometry");
MOC3D_DEFINE_ERROR(MeshError, "geometry");
MOC3D_DEFINE_ERROR(DomainError, "geometry");
MOC3D_DEFINE_ERROR(CapabilityError, "geometry");
MOC3D_DEFINE_ERROR(ParameterError, "trace2d");
MOC3D_DEFINE_ERROR(TracingError, "trace");
MOC3D_DEFINE_ERROR(BuildError, "trace3d");
MOC3D_DEFINE_ERROR(BoundsError, "trace3d");
MOC3D_DEFINE_ERROR(CapacityError, "trace3d");
MOC3D_DEFINE_ERROR(EigenvalueError, "solver");
MOC3D_DEFINE_ERROR(NumericalError, "solver");
MOC3D_DEFINE_ERROR(ExecutionError, "sched");
MOC3D_DEFINE_ERROR(ConfigError, "cli");

#undef MOC3D_DEFINE_ERROR

// Raised when power iteration hits max_iterations. Carries the history so
// callers can still report it.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, int iterations, double k_eff)
      : Error("solver", what), iterations_(iterations), k_eff_(k_eff) {}

  int iterations() const noexcept { return iterations_; }
  double k_eff() const noexcept { return k_eff_; }

 private:
  int iterations_;
  double k_eff_;
};

}  // namespace moc3d

#endif
