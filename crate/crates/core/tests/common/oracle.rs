// SPDX-License-Identifier: Apache-2.0

//! Extractor against the naive reference reader.

use super::{refparse, ExpectedPort, Header};
use uvmforge::rtl::{extract_interface, DutInterface};

pub fn crate_view(iface: &DutInterface) -> Vec<ExpectedPort> {
    iface
        .ports
        .iter()
        .map(|p| ExpectedPort {
            name: p.name.clone(),
            direction: p.direction.keyword(),
            msb: p.msb,
            lsb: p.lsb,
        })
        .collect()
}

/// Field-by-field comparison of the extractor against the reference reader
/// and of the reference reader against the generator's ground truth.
pub fn check(h: &Header) -> Result<(), String> {
    let reference = refparse::parse(&h.source, &h.module).ok_or("reference parser rejected header")?;
    if reference.ports != h.ports || reference.params != h.params {
        return Err(format!("reference disagrees with generator on:\n{}", h.source));
    }
    let iface = extract_interface(&[h.source.as_str()], &h.module).map_err(|e| format!("{e}\n{}", h.source))?;
    if iface.module_name != reference.module {
        return Err(format!("module name {} != {}", iface.module_name, reference.module));
    }
    if crate_view(&iface) != reference.ports {
        return Err(format!(
            "ports differ\n{:?}\n{:?}\n{}",
            crate_view(&iface),
            reference.ports,
            h.source
        ));
    }
    if iface.parameters != reference.params {
        return Err(format!(
            "parameters differ {:?} {:?}",
            iface.parameters, reference.params
        ));
    }
    Ok(())
}
