use crate::camera::Camera;
use crate::image::Image;
use crate::primitive::Mode;

/// A camera with its ground-truth image.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub camera: Camera,
    pub target: Image,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub views: Vec<View>,
}

impl Dataset {
    pub fn new(views: Vec<View>) -> Self {
        Self { views }
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn mode(&self) -> Option<Mode> {
        self.views.first().map(|v| v.camera.mode())
    }

    /// Splits view indices into (train, holdout): every `every`-th view
    /// starting at 0 is held out. With a single view, or `every == 0`, all
    /// views serve both roles.
    pub fn split(&self, every: usize) -> (Vec<usize>, Vec<usize>) {
        let all: Vec<usize> = (0..self.len()).collect();
        if every == 0 || self.len() <= 1 {
            return (all.clone(), all);
        }
        let (test, train): (Vec<usize>, Vec<usize>) = all.into_iter().partition(|i| i % every == 0);
        (train, test)
    }

    /// Length scale used for the split threshold and the position learning
    /// rate: the larger image side in 2D, 1.1 × the largest camera distance
    /// from the mean camera center in 3D.
    pub fn scene_extent(&self) -> f64 {
        match self.mode() {
            None => 1.0,
            Some(Mode::TwoD) => self
                .views
                .iter()
                .map(|v| v.camera.width.max(v.camera.height) as f64)
                .fold(0.0, f64::max),
            Some(Mode::ThreeD) => {
                let centers: Vec<_> = self.views.iter().map(|v| v.camera.center()).collect();
                let mean = centers.iter().sum::<nalgebra::Vector3<f64>>() / centers.len() as f64;
                let r = centers.iter().map(|c| (c - mean).norm()).fold(0.0, f64::max);
                if r > 0.0 {
                    1.1 * r
                } else {
                    1.0
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn views(n: usize) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|_| View {
                    camera: Camera::identity2d(4, 6),
                    target: Image::new(4, 6, 3),
                })
                .collect(),
        )
    }

    #[test]
    fn every_eighth_is_held_out() {
        let (train, test) = views(17).split(8);
        assert_eq!(test, vec![0, 8, 16]);
        assert_eq!(train.len(), 14);
        assert!(!train.contains(&8));
    }

    #[test]
    fn single_view_is_shared() {
        let (train, test) = views(1).split(8);
        assert_eq!(train, vec![0]);
        assert_eq!(test, vec![0]);
    }

    #[test]
    fn extent_2d_is_larger_side() {
        assert_eq!(views(2).scene_extent(), 6.0);
    }
}
