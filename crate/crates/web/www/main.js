import init, { two_state_report, overlap_halving, blindness_scan } from "./pkg/blindsim_web.js";

const $ = (id) => document.getElementById(id);
const fmt = (x) => Number(x).toExponential(4);
const flag = (ok) => `<span class="${ok ? "ok" : "fail"}">${ok ? "pass" : "FAIL"}</span>`;

function guard(out, f) {
  try {
    out.innerHTML = f();
  } catch (e) {
    out.innerHTML = `<pre class="fail">${e.message ?? e}</pre>`;
  }
}

function twoState() {
  const n = Number($("ts-n").value);
  const { record: r, distribution: p } = JSON.parse(two_state_report(n));
  const b = r.paper_bounds;
  const rows = [
    ["eps_corr", Number(r.eps_corr.split("/")[0]) / Number(r.eps_corr.split("/")[1]), b.eps_corr, r.pass.eps_corr],
    ["&frac12;&#x2016;&psi;0 &minus; &psi;1&#x2016;", r.parity_distance, b.parity_distance, r.pass.parity_distance],
    ["&frac12;&#x2016;&psi; &minus; &chi;(0)&#x2016;", r.chi_distance, b.chi_distance, r.pass.chi_distance],
    ["&Delta; (assembled)", r.delta, b.delta, r.pass.delta],
  ];
  return `<p>p(0), p(&pi;/2), p(&pi;), p(3&pi;/2) = ${r.p.join(", ")}
    (${p.map((x) => x.toFixed(6)).join(", ")})</p>
    <table><tr><th>quantity</th><th>value</th><th>bound</th><th></th></tr>
    ${rows.map(([k, v, bd, ok]) => `<tr><td>${k}</td><td>${fmt(v)}</td><td>${fmt(bd)}</td><td>${flag(ok)}</td></tr>`).join("")}
    </table>`;
}

function halving() {
  const chain = JSON.parse(overlap_halving(Number($("oh-phi").value), Number($("oh-steps").value)));
  return `<table><tr><th>step</th><th>&phi;</th><th>&phi;&prime;</th><th>overlap in</th><th>overlap out</th><th>isometry defect</th></tr>
    ${chain.map((s, k) => `<tr><td>${k + 1}</td><td>${s.phi.toFixed(6)}</td><td>${s.phi_prime.toFixed(6)}</td>
      <td>${s.overlap_in.toFixed(10)}</td><td>${s.overlap_out.toFixed(10)}</td><td>${fmt(s.isometry_defect)}</td></tr>`).join("")}
    </table>`;
}

function scan() {
  const r = JSON.parse(blindness_scan($("bs-family").value, Number($("bs-sites").value), BigInt($("bs-seed").value)));
  const expected = r.weak ? r.max_distance <= 1e-10 : r.max_distance > 1e-3;
  return `<p>weak: ${r.weak} (pair deviation ${fmt(r.weak_deviation)}); ${r.pairs} pairs compared</p>
    <p>max distance ${fmt(r.max_distance)} between &phi; = [${r.worst[0].join(", ")}] and [${r.worst[1].join(", ")}]
    ${flag(expected)}</p>`;
}

await init();
$("ts-run").onclick = () => guard($("ts-out"), twoState);
$("oh-run").onclick = () => guard($("oh-out"), halving);
$("bs-run").onclick = () => guard($("bs-out"), scan);
$("ts-run").click();
