#include <pybind11/pybind11.h>
PYBIND11_MODULE(_mcsec, m) { m.doc() = "stub"; }
