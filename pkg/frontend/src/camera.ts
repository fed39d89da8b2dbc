/**
 * Orbit camera: azimuth/height/radius around the character root, plus a
 * coalescer that sends at most one CameraUpdate per animation tick no
 * matter how many drag events arrive.
 */

export class OrbitCamera {
  azimuth: number;  // radians; 0 puts the camera on +z (facing the figure)
  height: number;
  radius: number;

  constructor(radius = 500, height = 120, azimuth = 0) {
    this.radius = radius;
    this.height = height;
    this.azimuth = azimuth;
  }

  /** Horizontal drag in pixels -> azimuth; ~360 degrees per 720 px. */
  dragBy(dxPixels: number, dyPixels = 0): void {
    this.azimuth += dxPixels * (Math.PI / 360);
    this.height = Math.max(10, this.height + dyPixels);
  }

  position(rootGround: [number, number] = [0, 0]): [number, number, number] {
    return [
      rootGround[0] + this.radius * Math.sin(this.azimuth),
      this.height,
      rootGround[1] + this.radius * Math.cos(this.azimuth),
    ];
  }
}

export class CoalescedSender {
  private dirty = false;
  private latest: [number, number, number] | null = null;
  sent = 0;

  constructor(private send: (p: [number, number, number]) => void) {}

  update(position: [number, number, number]): void {
    this.latest = position;
    this.dirty = true;
  }

  /** Called once per animation tick; flushes at most one update. */
  tick(): void {
    if (this.dirty && this.latest) {
      this.send(this.latest);
      this.sent += 1;
      this.dirty = false;
    }
  }
}
