//! Structural Verilog-2001 and JSON export.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{GateKind, NetId, Netlist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetlistFormat {
    Verilog,
    Json,
}

impl NetlistFormat {
    pub fn extension(self) -> &'static str {
        match self {
            NetlistFormat::Verilog => "v",
            NetlistFormat::Json => "json",
        }
    }

    pub fn render(self, n: &Netlist) -> String {
        match self {
            NetlistFormat::Verilog => to_verilog(n),
            NetlistFormat::Json => to_json(n),
        }
    }
}

pub fn to_json(n: &Netlist) -> String {
    let mut s = serde_json::to_string(n).expect("netlist serialization is infallible");
    s.push('\n');
    s
}

fn ident(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit()) {
        s.insert(0, '_');
    }
    s
}

pub fn to_verilog(n: &Netlist) -> String {
    // Primary-input bits are referenced as `port[i]`, gate outputs as `nK`.
    let mut names: Vec<String> = (0..n.net_count).map(|i| format!("n{i}")).collect();
    for port in &n.inputs {
        let p = ident(&port.name);
        for (i, &net) in port.nets.iter().enumerate() {
            names[net as usize] = format!("{p}[{i}]");
        }
    }
    let name = |net: NetId| names[net as usize].as_str();

    let mut out = String::new();
    let mut ports: Vec<String> = Vec::new();
    for p in &n.inputs {
        ports.push(format!("  input wire [{}:0] {}", p.width().max(1) - 1, ident(&p.name)));
    }
    for p in &n.outputs {
        ports.push(format!("  output wire [{}:0] {}", p.width().max(1) - 1, ident(&p.name)));
    }
    writeln!(out, "module {} (\n{}\n);", ident(&n.name), ports.join(",\n")).unwrap();
    for g in &n.gates {
        writeln!(out, "  wire n{};", g.output).unwrap();
    }
    for (i, g) in n.gates.iter().enumerate() {
        let o = name(g.output);
        let ins: Vec<&str> = g.inputs.iter().map(|&x| name(x)).collect();
        match g.kind {
            GateKind::Const0 => writeln!(out, "  assign {o} = 1'b0;"),
            GateKind::Const1 => writeln!(out, "  assign {o} = 1'b1;"),
            GateKind::Mux2 => writeln!(out, "  assign {o} = {} ? {} : {};", ins[0], ins[2], ins[1]),
            kind => {
                let prim = match kind {
                    GateKind::Not => "not",
                    GateKind::And2 => "and",
                    GateKind::Or2 => "or",
                    GateKind::Nand2 => "nand",
                    GateKind::Nor2 => "nor",
                    GateKind::Xor2 => "xor",
                    GateKind::Xnor2 => "xnor",
                    _ => unreachable!(),
                };
                writeln!(out, "  {prim} g{i} ({o}, {});", ins.join(", "))
            }
        }
        .unwrap();
    }
    for p in &n.outputs {
        let port = ident(&p.name);
        for (i, &net) in p.nets.iter().enumerate() {
            writeln!(out, "  assign {port}[{i}] = {};", name(net)).unwrap();
        }
    }
    out.push_str("endmodule\n");
    out
}
