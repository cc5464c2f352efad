// SPDX-License-Identifier: Apache-2.0

//! Locked-netlist deobfuscation runtime toolkit.
//!
//! The pipeline: parse a `.bench` netlist ([`netlist`]), lock it with key
//! gates or LUTs ([`obfuscate`]), break the lock with the oracle-guided SAT
//! attack ([`attack`], built on [`cnf`] and [`satsolve`]), and learn to
//! predict the attack effort from the locked circuit's graph with a
//! graph-convolutional regressor ([`icnet`]). [`experiments`] ties the
//! stages together for dataset generation, training and reporting.

pub mod attack;
pub mod cnf;
pub mod experiments;
pub mod icnet;
pub mod netlist;
pub mod numerics;
pub mod obfuscate;
pub mod satsolve;
