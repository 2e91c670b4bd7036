import init, { traceWall, branchTable, dispersivePacket } from "./pkg/wallwave_demo.js";

const $ = (id) => document.getElementById(id);

function show(id, text, isError = false) {
  const el = $(id);
  el.textContent = text;
  el.className = isError ? "out err" : "out";
}

function frame(ctx, xs, ys) {
  const finite = (v) => v.filter(Number.isFinite);
  const fx = finite(xs), fy = finite(ys);
  const x0 = Math.min(...fx), x1 = Math.max(...fx);
  const y0 = Math.min(...fy), y1 = Math.max(...fy);
  const pad = 24, w = ctx.canvas.width, h = ctx.canvas.height;
  const sx = (w - 2 * pad) / (x1 - x0 || 1), sy = (h - 2 * pad) / (y1 - y0 || 1);
  return {
    px: (x) => pad + (x - x0) * sx,
    py: (y) => h - pad - (y - y0) * sy,
  };
}

function drawWall() {
  const ctx = $("wall").getContext("2d");
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  const b = parseFloat($("box").value);
  try {
    const trace = traceWall($("expr").value, -b, b, -b, b);
    const xy = trace.xy(), k = trace.curvature(), mu = trace.slope();
    const n = k.length;
    const xs = [-b, b], ys = [-b, b];
    const { px, py } = frame(ctx, xs, ys);
    const kmax = Math.max(...k.map(Math.abs), 1e-9);
    for (let i = 1; i < n; i++) {
      const c = k[i] / kmax;
      ctx.strokeStyle = c >= 0 ? `rgb(${Math.round(200 * c)},40,${Math.round(200 * (1 - c))})`
                               : `rgb(40,${Math.round(200 * -c)},${Math.round(200 * (1 + c))})`;
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(px(xy[2 * i - 2]), py(xy[2 * i - 1]));
      ctx.lineTo(px(xy[2 * i]), py(xy[2 * i + 1]));
      ctx.stroke();
    }
    show("wall-out", `${trace.closed() ? "closed" : "open"} curve, length ${trace.length().toFixed(6)}, ` +
      `max |k| ${kmax.toFixed(4)}, μ ∈ [${Math.min(...mu).toFixed(3)}, ${Math.max(...mu).toFixed(3)}]`);
    trace.free();
  } catch (e) {
    show("wall-out", String(e), true);
  }
}

function drawBands() {
  const ctx = $("bands").getContext("2d");
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  const mu = parseFloat($("mu").value), mmax = parseInt($("mmax").value, 10), n = 201;
  try {
    const t = branchTable($("model").value, mu, mmax, -4, 4, n);
    const cols = 2 + 2 * mmax;
    const xi = [], curves = Array.from({ length: cols - 1 }, () => []);
    for (let i = 0; i < n; i++) {
      xi.push(t[i * cols]);
      for (let c = 1; c < cols; c++) curves[c - 1].push(t[i * cols + c]);
    }
    const { px, py } = frame(ctx, xi, curves.flat());
    curves.forEach((e, c) => {
      ctx.strokeStyle = c === 0 ? "#c00" : "#246";
      ctx.lineWidth = c === 0 ? 2.5 : 1.2;
      ctx.beginPath();
      let pen = false;
      for (let i = 0; i < n; i++) {
        if (!Number.isFinite(e[i])) { pen = false; continue; }
        if (pen) ctx.lineTo(px(xi[i]), py(e[i])); else ctx.moveTo(px(xi[i]), py(e[i]));
        pen = true;
      }
      ctx.stroke();
    });
    show("bands-out", `μ = ${mu.toFixed(1)}: gap edges ±${Math.sqrt(2 * mu).toFixed(4)} for m = 1`);
  } catch (e) {
    show("bands-out", String(e), true);
  }
}

function drawPacket() {
  const ctx = $("packet").getContext("2d");
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  const t = parseFloat($("time").value);
  try {
    const out = dispersivePacket(parseFloat($("eps").value), parseFloat($("xic").value), parseFloat($("xiw").value), t);
    const peak = out[out.length - 1];
    const xs = [], ds = [];
    for (let i = 0; i + 1 < out.length - 1; i += 2) { xs.push(out[i]); ds.push(out[i + 1]); }
    const { px, py } = frame(ctx, [-4, 4], [0, Math.max(...ds)]);
    ctx.fillStyle = "rgba(200,0,0,0.08)";
    ctx.fillRect(px(-t), 0, px(t) - px(-t), ctx.canvas.height);
    ctx.strokeStyle = "#036";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(ds[i])) : ctx.moveTo(px(x), py(ds[i]))));
    ctx.stroke();
    show("packet-out", `t = ${t.toFixed(2)}: max |v| = ${peak.toExponential(4)}, ` +
      `max |v|·√t = ${(peak * Math.sqrt(Math.max(t, 1e-9))).toExponential(4)}`);
  } catch (e) {
    show("packet-out", String(e), true);
  }
}

await init();
$("trace").addEventListener("click", drawWall);
for (const id of ["model", "mu", "mmax"]) $(id).addEventListener("input", drawBands);
for (const id of ["eps", "xic", "xiw", "time"]) $(id).addEventListener("input", drawPacket);
drawWall();
drawBands();
drawPacket();
