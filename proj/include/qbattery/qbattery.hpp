#pragma once

#include "qbattery/chain_model.hpp"
#include "qbattery/errors.hpp"
#include "qbattery/minimal_model.hpp"
#include "qbattery/passivity.hpp"
#include "qbattery/pauli.hpp"
#include "qbattery/pauli_io.hpp"
#include "qbattery/protocol.hpp"
#include "qbattery/rng.hpp"
#include "qbattery/spectral.hpp"
#include "qbattery/tensor.hpp"
