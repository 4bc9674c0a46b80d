#pragma once

#include "sensorcdn/cache.hpp"
#include "sensorcdn/common.hpp"
#include "sensorcdn/delivery.hpp"
#include "sensorcdn/engine.hpp"
#include "sensorcdn/flow.hpp"
#include "sensorcdn/metrics.hpp"
#include "sensorcdn/scenario.hpp"
#include "sensorcdn/sensordata.hpp"
#include "sensorcdn/signaling.hpp"
#include "sensorcdn/topology.hpp"
