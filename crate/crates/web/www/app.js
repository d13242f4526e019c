import init, { regmax_profile, cone_geometry, glue_profile } from "./pkg/conekit_web.js";

// --- tiny canvas plotting ---------------------------------------------------

function plotArea(canvas, xRange, yRange) {
  const ctx = canvas.getContext("2d");
  const pad = 36;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  const sx = (x) => pad + ((x - xRange[0]) / (xRange[1] - xRange[0])) * w;
  const sy = (y) => pad + h - ((y - yRange[0]) / (yRange[1] - yRange[0])) * h;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#8886";
  ctx.lineWidth = 1;
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#888";
  ctx.font = "11px system-ui";
  ctx.fillText(xRange[0].toFixed(2), pad, canvas.height - pad + 14);
  ctx.fillText(xRange[1].toFixed(2), pad + w - 24, canvas.height - pad + 14);
  ctx.fillText(yRange[1].toFixed(2), 4, pad + 8);
  ctx.fillText(yRange[0].toFixed(2), 4, pad + h);
  return { ctx, sx, sy };
}

// Draw a polyline; null values break the line (used for the pole branch,
// which is -infinity at s = 0).
function line(area, xs, ys, color, width = 2) {
  const { ctx, sx, sy } = area;
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  let pen = false;
  for (let i = 0; i < xs.length; i++) {
    const y = ys[i];
    if (y === null || !isFinite(y)) { pen = false; continue; }
    if (pen) ctx.lineTo(sx(xs[i]), sy(y));
    else { ctx.moveTo(sx(xs[i]), sy(y)); pen = true; }
  }
  ctx.stroke();
}

function bounds(arrays, clampLow) {
  let lo = Infinity, hi = -Infinity;
  for (const a of arrays) for (const v of a) {
    if (v === null || !isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (clampLow !== undefined) lo = Math.max(lo, clampLow);
  const m = 0.08 * (hi - lo || 1);
  return [lo - m, hi + m];
}

function slider(id, render) {
  const input = document.getElementById(id);
  const out = document.getElementById(id + "-out");
  const show = () => { out.textContent = Number(input.value).toFixed(2); };
  input.addEventListener("input", () => { show(); render(); });
  show();
  return input;
}

// --- panels ------------------------------------------------------------------

function regmaxPanel() {
  const canvas = document.getElementById("rm-canvas");
  const render = () => {
    const delta = Number(document.getElementById("rm-delta").value);
    const degree = Number(document.getElementById("rm-degree").value);
    const data = JSON.parse(regmax_profile(delta, degree, 400));
    const d2max = Math.max(...data.second_derivative, 1e-9);
    const scaled = data.second_derivative.map((v) => (v / d2max) * 0.4 * delta);
    const area = plotArea(canvas, [data.x[0], data.x[data.x.length - 1]],
      bounds([data.smooth_max, data.hard_max, scaled]));
    line(area, data.x, scaled, "#e8923a", 1.5);
    line(area, data.x, data.hard_max, "#999", 1.5);
    line(area, data.x, data.smooth_max, "#3a7bd5", 2.5);
  };
  slider("rm-delta", render);
  slider("rm-degree", render);
  render();
}

function conePanel() {
  const canvas = document.getElementById("cone-canvas");
  const render = () => {
    const a1 = Number(document.getElementById("cone-a1").value);
    const a2 = Number(document.getElementById("cone-a2").value);
    const data = JSON.parse(cone_geometry(a1, a2, 160, 8));
    const all = [data.curve_x, data.curve_y];
    for (const f of data.flows) { all.push(f.x); all.push(f.y); }
    const hi = Math.max(...all.flat()) * 1.08;
    const area = plotArea(canvas, [0, hi], [0, hi]);
    for (const f of data.flows) line(area, f.x, f.y, "#e8923a", 1.2);
    line(area, data.curve_x, data.curve_y, "#3a7bd5", 2.5);
  };
  slider("cone-a1", render);
  slider("cone-a2", render);
  render();
}

function gluePanel() {
  const canvas = document.getElementById("glue-canvas");
  const certList = document.getElementById("glue-certs");
  const render = () => {
    const eps = Number(document.getElementById("glue-eps").value);
    const delta = Number(document.getElementById("glue-delta").value);
    const c1 = Number(document.getElementById("glue-c1").value);
    const amp = Number(document.getElementById("glue-amp").value);
    certList.innerHTML = "<li>running…</li>";
    // Yield to the event loop so the status renders before the pipeline runs.
    setTimeout(() => {
      let data;
      try {
        data = JSON.parse(glue_profile(eps, delta, c1, amp, 301));
      } catch (e) {
        certList.innerHTML = `<li class="fail">${e}</li>`;
        return;
      }
      // Clip the view a little above the pole plunge.
      const yRange = bounds([data.psi, data.extension, data.pole_branch], -3);
      const area = plotArea(canvas, [data.s[0], data.s[data.s.length - 1]], yRange);
      line(area, data.s, data.pole_branch, "#999", 1.5);
      line(area, data.s, data.extension, "#3aa76d", 1.5);
      line(area, data.s, data.psi, "#3a7bd5", 2.5);
      certList.innerHTML = "";
      for (const c of data.certificates) {
        const li = document.createElement("li");
        li.className = c.pass ? "pass" : "fail";
        li.textContent = `${c.name}: worst ${Number(c.worst_value).toExponential(2)}`;
        certList.appendChild(li);
      }
      const k = document.createElement("li");
      k.textContent = `C = ${data.constants.compensation_c.toFixed(3)}, ` +
        `A = ${data.constants.offset_a.toFixed(3)}, ` +
        `near radius = ${data.constants.near_z_radius.toFixed(3)}`;
      certList.appendChild(k);
    }, 0);
  };
  for (const id of ["glue-eps", "glue-delta", "glue-c1", "glue-amp"]) slider(id, () => {});
  document.getElementById("glue-run").addEventListener("click", render);
  render();
}

init().then(() => {
  regmaxPanel();
  conePanel();
  gluePanel();
});
