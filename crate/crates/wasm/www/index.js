import init, {
  homodyne_spectrum,
  squeezing_optimum,
  covariance_ellipse,
  radiation_pattern_polar,
} from "./pkg/ponderomotive_wasm.js";

const OMEGA_M_HZ = 73.25e3;
const F_LO = 50e3;
const F_HI = 100e3;
const POINTS = 600;

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function rates() {
  const gamma = num("gamma");
  const gtot = num("gtot") * 1e3;
  return { gamma, gtot, gmeas: num("eta") * gtot };
}

function axes(ctx, w, h, pad) {
  ctx.strokeStyle = "#999";
  ctx.lineWidth = 1;
  ctx.strokeRect(pad, pad / 2, w - 1.5 * pad, h - 1.5 * pad);
}

function drawSpectrum() {
  const { gamma, gtot, gmeas } = rates();
  const theta = num("theta") * Math.PI;
  const s = homodyne_spectrum(OMEGA_M_HZ, gamma, gtot, gmeas, theta, F_LO, F_HI, POINTS);
  const c = $("spectrum");
  const ctx = c.getContext("2d");
  const pad = 40;
  ctx.clearRect(0, 0, c.width, c.height);
  axes(ctx, c.width, c.height, pad);
  // Log scale, 0.1 to 1000 shot-noise units.
  const lo = -1, hi = 3;
  const x = (k) => pad + (k / (POINTS - 1)) * (c.width - 1.5 * pad);
  const y = (v) => {
    const l = Math.min(hi, Math.max(lo, Math.log10(v)));
    return pad / 2 + ((hi - l) / (hi - lo)) * (c.height - 1.5 * pad);
  };
  ctx.strokeStyle = "#c33";
  ctx.setLineDash([4, 3]);
  ctx.beginPath();
  ctx.moveTo(pad, y(1));
  ctx.lineTo(c.width - pad / 2, y(1));
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.strokeStyle = "#1f5fa8";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  s.forEach((v, k) => (k ? ctx.lineTo(x(k), y(v)) : ctx.moveTo(x(k), y(v))));
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  ctx.fillText("50 kHz", pad, c.height - 8);
  ctx.fillText("100 kHz", c.width - pad - 20, c.height - 8);
  for (const d of [-1, 0, 1, 2, 3]) ctx.fillText(`1e${d}`, 4, y(10 ** d) + 4);

  let min = Infinity, at = 0;
  s.forEach((v, k) => { if (v < min) { min = v; at = k; } });
  const fmin = F_LO + (at / (POINTS - 1)) * (F_HI - F_LO);
  const [best, fbest, tbest] = squeezing_optimum(OMEGA_M_HZ, gamma, gtot, gmeas);
  $("spectrum-info").textContent =
    `min at this θ: ${min.toFixed(4)} at ${(fmin / 1e3).toFixed(2)} kHz\n` +
    `best over θ:   ${best.toFixed(4)} at ${(fbest / 1e3).toFixed(2)} kHz, θ = ${(tbest / Math.PI).toFixed(4)}π`;
}

function drawEllipse() {
  const { gamma, gtot, gmeas } = rates();
  const mode = num("mode") * 1e3;
  const [vx, vy, cov, minor, major, tilt] = covariance_ellipse(OMEGA_M_HZ, gamma, gtot, gmeas, mode);
  const c = $("ellipse");
  const ctx = c.getContext("2d");
  const cx = c.width / 2, cy = c.height / 2;
  ctx.clearRect(0, 0, c.width, c.height);
  // 1σ contours; the scale follows the major axis.
  const scale = (0.42 * c.width) / Math.max(Math.sqrt(major), Math.sqrt(0.5) * 1.2);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(0, cy); ctx.lineTo(c.width, cy);
  ctx.moveTo(cx, 0); ctx.lineTo(cx, c.height);
  ctx.stroke();
  ctx.strokeStyle = "#c33";
  ctx.setLineDash([4, 3]);
  ctx.beginPath();
  ctx.arc(cx, cy, Math.sqrt(0.5) * scale, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.strokeStyle = "#1f5fa8";
  ctx.lineWidth = 2;
  ctx.beginPath();
  // Canvas y points down, so the rotation is negated.
  ctx.ellipse(cx, cy, Math.sqrt(major) * scale, Math.sqrt(minor) * scale, -tilt, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.lineWidth = 1;
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  ctx.fillText("X", c.width - 14, cy - 4);
  ctx.fillText("Y", cx + 4, 12);
  $("ellipse-info").textContent =
    `V_X = ${vx.toFixed(4)}  V_Y = ${vy.toFixed(4)}  ⟨XY⟩ = ${cov.toFixed(4)}\n` +
    `axes ${minor.toFixed(4)}, ${major.toFixed(4)} (vacuum 0.5)  tilt ${tilt.toFixed(3)} rad`;
}

function drawPattern() {
  const kind = $("axis").value;
  const a = num("geom");
  const phi = num("phi") * Math.PI;
  const n = 720;
  const rho = radiation_pattern_polar(kind, phi, 1.0, a, n);
  const c = $("pattern");
  const ctx = c.getContext("2d");
  const cx = c.width / 2, cy = c.height / 2;
  ctx.clearRect(0, 0, c.width, c.height);
  const peak = Math.max(...rho, 1e-12);
  const r = 0.44 * c.width / peak;
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(0, cy); ctx.lineTo(c.width, cy);
  ctx.moveTo(cx, 0); ctx.lineTo(cx, c.height);
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.font = "11px system-ui";
  ctx.fillText("beam →", c.width - 48, cy - 6);
  ctx.strokeStyle = "#1f5fa8";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  rho.forEach((v, k) => {
    const t = (2 * Math.PI * k) / n;
    // Beam axis drawn horizontally, pointing right.
    const px = cx + r * v * Math.cos(t);
    const py = cy - r * v * Math.sin(t);
    k ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
  });
  ctx.closePath();
  ctx.stroke();
  const forward = rho[0], backward = rho[n / 2];
  $("pattern-info").textContent =
    `ρ forward ${forward.toExponential(3)}  backward ${backward.toExponential(3)} (per sr, β² = 1)`;
}

function show(id, fmt) {
  $(`${id}-v`).textContent = fmt(num(id));
}

function update() {
  show("gamma", (v) => `${v} Hz`);
  show("gtot", (v) => `${v.toFixed(1)} kHz`);
  show("eta", (v) => v.toFixed(2));
  show("theta", (v) => `${v.toFixed(3)}π`);
  show("mode", (v) => `${v.toFixed(1)} kHz`);
  show("geom", (v) => v.toFixed(2));
  show("phi", (v) => `${v.toFixed(2)}π`);
  try {
    $("error").textContent = "";
    drawSpectrum();
    drawEllipse();
    drawPattern();
  } catch (e) {
    $("error").textContent = String(e);
  }
}

await init();
for (const el of document.querySelectorAll("input, select")) el.addEventListener("input", update);
update();
