#pragma once

#include "fwm/analysis.hpp"
#include "fwm/cascade.hpp"
#include "fwm/dynamics.hpp"
#include "fwm/fock_sector.hpp"
#include "fwm/io.hpp"
#include "fwm/oracle.hpp"
