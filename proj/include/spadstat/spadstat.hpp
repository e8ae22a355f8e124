#pragma once

// Single include for the whole toolkit.

#include "errors.hpp"
#include "slots.hpp"
#include "afterpulse.hpp"
#include "waiting.hpp"
#include "timetags.hpp"
#include "simulator.hpp"
#include "histogram.hpp"
#include "estimation.hpp"
#include "tagio.hpp"
#include "report.hpp"
