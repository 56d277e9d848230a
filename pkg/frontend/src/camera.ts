// Camera frame handling: decode the base64 binary PGM from a frame message
// and paint it with the detected-line marker (the cross on the thumbnail).

export interface DecodedFrame {
  width: number;
  height: number;
  pixels: Uint8Array; // grayscale, row-major
}

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  // node (tests)
  return new Uint8Array(Buffer.from(b64, "base64"));
}

export function decodePgm(data: Uint8Array): DecodedFrame {
  // header: "P5\n<w> <h>\n255\n" followed by raw bytes
  let pos = 0;
  const readLine = () => {
    let end = pos;
    while (end < data.length && data[end] !== 0x0a) end++;
    const line = new TextDecoder().decode(data.subarray(pos, end));
    pos = end + 1;
    return line;
  };
  const magic = readLine();
  if (magic !== "P5") throw new Error(`unsupported PGM magic: ${magic}`);
  const dims = readLine().split(/\s+/).map(Number);
  const maxval = readLine();
  if (dims.length !== 2 || maxval !== "255") {
    throw new Error("unsupported PGM header");
  }
  const [width, height] = dims;
  const pixels = data.subarray(pos, pos + width * height);
  if (pixels.length !== width * height) throw new Error("truncated PGM body");
  return { width, height, pixels: new Uint8Array(pixels) };
}

export function drawFrame(
  ctx: CanvasRenderingContext2D,
  frame: DecodedFrame,
  line: { found: boolean; x_px: number },
): void {
  const img = ctx.createImageData(frame.width, frame.height);
  for (let i = 0; i < frame.pixels.length; i++) {
    const v = frame.pixels[i];
    img.data[4 * i] = v;
    img.data[4 * i + 1] = v;
    img.data[4 * i + 2] = v;
    img.data[4 * i + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);
  if (line.found) {
    // cross marker at the detected line center
    const cx = line.x_px;
    const cy = frame.height / 2;
    ctx.strokeStyle = "#ff2d2d";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(cx - 10, cy);
    ctx.lineTo(cx + 10, cy);
    ctx.moveTo(cx, cy - 10);
    ctx.lineTo(cx, cy + 10);
    ctx.stroke();
  }
}
